"""Plume concentration models and grid geometry.

A stationary source at (xs, ys) produces a deterministic mean concentration
field f(x, y). Sensors read f plus Gaussian noise. Everything downstream
(likelihoods, score maps) is built on top of the two model shapes here.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

BLOB = "isotropic-blob"
ADVECTED = "advected-plume"

# Commensurability check for the measurement/source lattices: the pitch ratio
# must be a small rational or the offset lattice cannot cover all pairs.
_MAX_PITCH_DENOMINATOR = 4096
_PITCH_RTOL = 1e-9


class KernelGridMismatch(ValueError):
    """Raised when a kernel's offset lattice cannot serve the requested grids."""


@dataclass(frozen=True)
class GridSpec:
    """Rectangular world with two uniform cell grids laid over it.

    The measurement grid (a_cells x b_cells) enumerates candidate sensing
    locations; the source grid (i_cells x j_cells) enumerates source
    hypotheses. Arrays over either grid are indexed [ix, iy] and flattened
    row-major, so flat index = ix * n_cols + iy. Cell centers sit at
    x_min + (ix + 0.5) * dx.
    """

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    a_cells: int
    b_cells: int
    i_cells: int
    j_cells: int

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("grid extent must be positive in both axes")
        for n in (self.a_cells, self.b_cells, self.i_cells, self.j_cells):
            if int(n) != n or n < 1:
                raise ValueError("cell counts must be positive integers")

    # -- pitches ------------------------------------------------------------

    @property
    def meas_dx(self) -> float:
        return (self.x_max - self.x_min) / self.a_cells

    @property
    def meas_dy(self) -> float:
        return (self.y_max - self.y_min) / self.b_cells

    @property
    def src_dx(self) -> float:
        return (self.x_max - self.x_min) / self.i_cells

    @property
    def src_dy(self) -> float:
        return (self.y_max - self.y_min) / self.j_cells

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.x_max - self.x_min, self.y_max - self.y_min))

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    # -- cell centers ---------------------------------------------------------

    def meas_x_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.a_cells) + 0.5) * self.meas_dx

    def meas_y_centers(self) -> np.ndarray:
        return self.y_min + (np.arange(self.b_cells) + 0.5) * self.meas_dy

    def src_x_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.i_cells) + 0.5) * self.src_dx

    def src_y_centers(self) -> np.ndarray:
        return self.y_min + (np.arange(self.j_cells) + 0.5) * self.src_dy

    def meas_centers(self) -> np.ndarray:
        """All measurement cell centers, shape (a_cells, b_cells, 2)."""
        xx, yy = np.meshgrid(self.meas_x_centers(), self.meas_y_centers(), indexing="ij")
        return np.stack([xx, yy], axis=-1)

    def src_centers(self) -> np.ndarray:
        """All source cell centers, shape (i_cells, j_cells, 2)."""
        xx, yy = np.meshgrid(self.src_x_centers(), self.src_y_centers(), indexing="ij")
        return np.stack([xx, yy], axis=-1)

    def meas_cell_center(self, flat_index: int) -> tuple[float, float]:
        ix, iy = divmod(int(flat_index), self.b_cells)
        if not (0 <= ix < self.a_cells):
            raise IndexError(f"measurement cell {flat_index} out of range")
        return (float(self.meas_x_centers()[ix]), float(self.meas_y_centers()[iy]))

    def src_cell_center(self, flat_index: int) -> tuple[float, float]:
        ix, iy = divmod(int(flat_index), self.j_cells)
        if not (0 <= ix < self.i_cells):
            raise IndexError(f"source cell {flat_index} out of range")
        return (float(self.src_x_centers()[ix]), float(self.src_y_centers()[iy]))

    @property
    def n_src_cells(self) -> int:
        return self.i_cells * self.j_cells

    @property
    def n_meas_cells(self) -> int:
        return self.a_cells * self.b_cells


@dataclass(frozen=True)
class PlumeParams:
    """Shape parameters for a concentration model plus sensor noise.

    kind selects the model. The isotropic blob uses strength and
    length_scale only. The advected plume uses wind, sigma0 and
    spread_rate; its cross-wind width grows linearly with downwind
    distance and there is no upwind signal at all.
    """

    kind: str = BLOB
    strength: float = 1.0          # peak emission, normalizes max f
    length_scale: float = 1.0      # blob radius scale
    wind: tuple[float, float] = (0.0, 0.0)
    sigma0: float = 1.0            # advected: width at the source
    spread_rate: float = 0.0       # advected: width growth per unit downwind
    noise_sigma: float = 1.0       # sensor noise stdev

    def __post_init__(self):
        if self.kind not in (BLOB, ADVECTED):
            raise ValueError(f"unknown plume kind {self.kind!r}")
        if self.strength < 0:
            raise ValueError("strength must be >= 0")
        if self.noise_sigma <= 0:
            raise ValueError("noise_sigma must be > 0")
        if self.kind == BLOB and self.length_scale <= 0:
            raise ValueError("length_scale must be > 0")
        if self.kind == ADVECTED:
            if self.sigma0 <= 0:
                raise ValueError("sigma0 must be > 0")
            if self.spread_rate < 0:
                raise ValueError("spread_rate must be >= 0")
            if self.wind[0] == 0.0 and self.wind[1] == 0.0:
                raise ValueError("advected plume needs a nonzero wind vector")


def _concentration_at_offset(dx, dy, params: PlumeParams):
    """Mean concentration for displacement (sensor - source). Vectorized."""
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    if params.kind == BLOB:
        r2 = dx * dx + dy * dy
        return params.strength * np.exp(-r2 / (2.0 * params.length_scale**2))
    # Advected: rotate into the wind frame; downwind component must be > 0.
    wx, wy = params.wind
    wnorm = float(np.hypot(wx, wy))
    ux, uy = wx / wnorm, wy / wnorm
    down = dx * ux + dy * uy
    cross = -dx * uy + dy * ux
    width = params.sigma0 + params.spread_rate * np.maximum(down, 0.0)
    shape = params.strength * (params.sigma0 / width) * np.exp(
        -(cross * cross) / (2.0 * width * width)
    )
    return np.where(down > 0.0, shape, 0.0)


def concentration(loc, source, params: PlumeParams):
    """Mean concentration read at loc for a source at source.

    loc and source are points or arrays of points with the coordinate pair on
    the last axis; they broadcast against each other. Depends only on the
    displacement loc - source, so the field is translation invariant.
    """
    loc = np.asarray(loc, dtype=float)
    source = np.asarray(source, dtype=float)
    offset = loc - source
    return _concentration_at_offset(offset[..., 0], offset[..., 1], params)


def snr_area_fraction(params: PlumeParams, grid: GridSpec, threshold: float = 1.0) -> float:
    """Fraction of measurement cells where f / noise_sigma exceeds threshold.

    Evaluated for a source placed at the domain center; summarizes how much
    of the search area a single well-placed sensor reading can see.
    """
    f = concentration(grid.meas_centers(), np.array(grid.center), params)
    return float(np.count_nonzero(f / params.noise_sigma > threshold)) / grid.n_meas_cells


def _axis_strides(meas_pitch: float, src_pitch: float) -> tuple[int, int]:
    """Integer strides (p, q) with meas_pitch/src_pitch == p/q, else raise."""
    ratio = meas_pitch / src_pitch
    frac = Fraction(ratio).limit_denominator(_MAX_PITCH_DENOMINATOR)
    if frac.numerator <= 0 or abs(float(frac) - ratio) > _PITCH_RTOL * ratio:
        raise KernelGridMismatch(
            f"measurement/source pitch ratio {ratio} is not a small rational; "
            "offset lattice cannot cover all displacements"
        )
    return frac.numerator, frac.denominator


@dataclass(frozen=True)
class OffsetKernel:
    """Squared-SNR kernel tabulated on the lattice of sensor-source offsets.

    values[tx - tx0, ty - ty0] holds f(offset)^2 / (2 sigma^2) in nats at
    offset_x = tx * pitch_x + shift_x (same per axis in y), where
    tx = stride_meas_x * ix - stride_src_x * is for measurement column ix and
    source column is. Strides record how each grid embeds into the common
    fine lattice.
    """

    values: np.ndarray
    tx0: int
    ty0: int
    pitch_x: float
    pitch_y: float
    shift_x: float
    shift_y: float
    stride_meas_x: int
    stride_src_x: int
    stride_meas_y: int
    stride_src_y: int
    grid: GridSpec = field(repr=False)

    def offset_x(self, tx) -> np.ndarray:
        return np.asarray(tx) * self.pitch_x + self.shift_x

    def offset_y(self, ty) -> np.ndarray:
        return np.asarray(ty) * self.pitch_y + self.shift_y


def squared_snr_kernel(params: PlumeParams, grid: GridSpec) -> OffsetKernel:
    """Tabulate k(d) = f(d)^2 / (2 sigma^2) over every sensor-source offset.

    The lattice spans all displacements (measurement center - source center),
    including sub-pitch shifts when the two grids differ in resolution.
    """
    px, qx = _axis_strides(grid.meas_dx, grid.src_dx)
    py, qy = _axis_strides(grid.meas_dy, grid.src_dy)
    fine_dx = grid.meas_dx / px
    fine_dy = grid.meas_dy / py
    # displacement = fine_pitch * t + (meas_pitch - src_pitch)/2 with
    # t = p*im - q*is; ranges follow from im in [0, A) and is in [0, I).
    shift_x = 0.5 * (grid.meas_dx - grid.src_dx)
    shift_y = 0.5 * (grid.meas_dy - grid.src_dy)
    tx0 = -qx * (grid.i_cells - 1)
    ty0 = -qy * (grid.j_cells - 1)
    tx = np.arange(tx0, px * (grid.a_cells - 1) + 1)
    ty = np.arange(ty0, py * (grid.b_cells - 1) + 1)
    off_x = tx * fine_dx + shift_x
    off_y = ty * fine_dy + shift_y
    f = _concentration_at_offset(off_x[:, None], off_y[None, :], params)
    values = (f * f) / (2.0 * params.noise_sigma**2)
    return OffsetKernel(
        values=values,
        tx0=int(tx0),
        ty0=int(ty0),
        pitch_x=fine_dx,
        pitch_y=fine_dy,
        shift_x=shift_x,
        shift_y=shift_y,
        stride_meas_x=px,
        stride_src_x=qx,
        stride_meas_y=py,
        stride_src_y=qy,
        grid=grid,
    )
