"""Sensor-placement scoring and next-measurement selection.

Three scoring tiers trade fidelity for speed: exact expected information
gain via Gauss-Hermite quadrature over hypothetical readings, a single
update at the expected reading, and a squared-SNR surrogate whose full map
is one zero-padded FFT cross-correlation instead of a quadruple loop over
measurement cells x source cells.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.fft import next_fast_len
from scipy.special import logsumexp

from .belief import LOG_2, LOGLIK_FLOOR, SourcePosterior, uniform_posterior
from .field import (
    GridSpec,
    KernelGridMismatch,
    OffsetKernel,
    PlumeParams,
    concentration,
    squared_snr_kernel,
)

TIER_EXACT = "exact"
TIER_EXPECTED = "expected-measurement"
TIER_SNR_FFT = "snr-fft"
TIER_SNR_BRUTE = "snr-brute"
TIERS = (TIER_EXACT, TIER_EXPECTED, TIER_SNR_FFT, TIER_SNR_BRUTE)


@dataclass(frozen=True)
class CostModel:
    """Movement cost = overhead + quad_coeff * distance^2."""

    overhead: float = 1.0
    quad_coeff: float = 0.0

    def __post_init__(self):
        if self.overhead <= 0:
            raise ValueError("overhead must be > 0 so cost ratios stay finite")
        if self.quad_coeff < 0:
            raise ValueError("quad_coeff must be >= 0")


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Hermite node count for averaging over hypothetical readings."""

    n_nodes: int = 16

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")


@dataclass(frozen=True)
class ScoreMap:
    """Per-measurement-cell scores in bits, (a_cells, b_cells), plus tier tag."""

    values: np.ndarray
    tier: str
    grid: GridSpec


def movement_cost(cm: CostModel, frm, to) -> np.ndarray:
    """Cost of relocating from frm to to; to may be an array of points."""
    frm = np.asarray(frm, dtype=float)
    to = np.asarray(to, dtype=float)
    d2 = np.sum((to - frm) ** 2, axis=-1)
    return cm.overhead + cm.quad_coeff * d2


def _hypothetical_ig_bits(
    post: SourcePosterior,
    candidate,
    m_values: np.ndarray,
    params: PlumeParams,
    reference: SourcePosterior,
) -> np.ndarray:
    """Info gain (bits) vs reference after one reading at candidate, per m."""
    f = concentration(np.asarray(candidate, float), post.grid.src_centers(), params)
    f = f.ravel()
    lp = post.log_probs.ravel()
    ref_lp = reference.log_probs.ravel()
    resid = (m_values[:, None] - f[None, :]) / params.noise_sigma
    ll = np.maximum(-0.5 * resid * resid, LOGLIK_FLOOR)  # shared const drops in norm
    new_lp = lp[None, :] + ll
    new_lp -= logsumexp(new_lp, axis=1, keepdims=True)
    p = np.exp(new_lp)
    with np.errstate(invalid="ignore"):  # zero-mass cells hit 0 * -inf, masked out
        terms = np.where(p > 0.0, p * (new_lp - ref_lp[None, :]), 0.0)
    return terms.sum(axis=1) / LOG_2


def eig_exact(
    post: SourcePosterior,
    candidate,
    params: PlumeParams,
    quad: QuadratureSpec = QuadratureSpec(),
    reference: SourcePosterior | None = None,
) -> float:
    """Expected info gain of measuring at candidate, quadrature over readings.

    The predictive density of the reading is a Gaussian mixture with one
    component per source hypothesis; each component is integrated with
    Gauss-Hermite nodes. reference defaults to the uniform distribution and
    should be the belief the agent started the episode with.
    """
    if reference is None:
        reference = uniform_posterior(post.grid)
    nodes, weights = hermgauss(quad.n_nodes)
    weights = weights / np.sqrt(np.pi)  # normalize to a probability average
    f = concentration(np.asarray(candidate, float), post.grid.src_centers(), params)
    f = f.ravel()
    p = post.probs().ravel()
    live = p > 0.0  # components with no mass contribute nothing
    m_grid = f[live, None] + np.sqrt(2.0) * params.noise_sigma * nodes[None, :]
    ig = _hypothetical_ig_bits(post, candidate, m_grid.ravel(), params, reference)
    ig = ig.reshape(-1, quad.n_nodes)
    return float(p[live] @ (ig @ weights))


def eig_at_expected_measurement(
    post: SourcePosterior,
    candidate,
    params: PlumeParams,
    reference: SourcePosterior | None = None,
) -> float:
    """Info gain from a single update at the posterior-mean reading."""
    if reference is None:
        reference = uniform_posterior(post.grid)
    f = concentration(np.asarray(candidate, float), post.grid.src_centers(), params)
    m_bar = float(post.probs().ravel() @ f.ravel())
    ig = _hypothetical_ig_bits(post, candidate, np.array([m_bar]), params, reference)
    return float(ig[0])


def snr_score_bruteforce(post: SourcePosterior, candidate, params: PlumeParams) -> float:
    """Posterior-weighted squared SNR at one candidate, in bits.

    Direct sum over every source hypothesis; the oracle the FFT map must
    reproduce.
    """
    f = concentration(np.asarray(candidate, float), post.grid.src_centers(), params)
    f = f.ravel()
    score = post.probs().ravel() @ (f * f) / (2.0 * params.noise_sigma**2)
    return float(score / LOG_2)


def snr_score_map_bruteforce(
    post: SourcePosterior, params: PlumeParams, grid: GridSpec, chunk: int = 256
) -> ScoreMap:
    """Squared-SNR score for every measurement cell by direct enumeration.

    Work scales with a_cells * b_cells * i_cells * j_cells; chunking bounds
    the temporary arrays, not the arithmetic.
    """
    centers = grid.meas_centers().reshape(-1, 2)
    src = grid.src_centers().reshape(-1, 2)
    p = post.probs().ravel()
    out = np.empty(centers.shape[0])
    inv = 1.0 / (2.0 * params.noise_sigma**2 * LOG_2)
    for lo in range(0, centers.shape[0], chunk):
        block = centers[lo : lo + chunk]
        f = concentration(block[:, None, :], src[None, :, :], params)
        out[lo : lo + block.shape[0]] = (f * f) @ p * inv
    return ScoreMap(out.reshape(grid.a_cells, grid.b_cells), TIER_SNR_BRUTE, grid)


def snr_score_map_fft(
    post: SourcePosterior, kernel: OffsetKernel, grid: GridSpec | None = None
) -> ScoreMap:
    """Squared-SNR score for every measurement cell via FFT cross-correlation.

    The posterior is embedded on the kernel's fine offset lattice, linearly
    convolved with the tabulated kernel under zero padding (no wraparound),
    and sampled back at the measurement centers.
    """
    if grid is None:
        grid = kernel.grid
    if kernel.grid != grid or post.grid != grid:
        raise KernelGridMismatch("kernel was tabulated for a different grid")
    qx, qy = kernel.stride_src_x, kernel.stride_src_y
    px, py = kernel.stride_meas_x, kernel.stride_meas_y
    up = np.zeros((qx * (grid.i_cells - 1) + 1, qy * (grid.j_cells - 1) + 1))
    up[::qx, ::qy] = post.probs()
    kv = kernel.values
    sx = next_fast_len(up.shape[0] + kv.shape[0] - 1, real=True)
    sy = next_fast_len(up.shape[1] + kv.shape[1] - 1, real=True)
    conv = np.fft.irfft2(
        np.fft.rfft2(up, s=(sx, sy)) * np.fft.rfft2(kv, s=(sx, sy)), s=(sx, sy)
    )
    # score(im) lives at convolution index p*im - tx0 (tx0 = -q*(I-1))
    x0 = -kernel.tx0
    y0 = -kernel.ty0
    vals = conv[
        x0 : x0 + px * (grid.a_cells - 1) + 1 : px,
        y0 : y0 + py * (grid.b_cells - 1) + 1 : py,
    ]
    vals = np.maximum(vals, 0.0) / LOG_2  # FFT roundoff may graze below zero
    return ScoreMap(np.ascontiguousarray(vals), TIER_SNR_FFT, grid)


def compute_score_map(
    post: SourcePosterior,
    params: PlumeParams,
    grid: GridSpec,
    tier: str,
    quad: QuadratureSpec = QuadratureSpec(),
    reference: SourcePosterior | None = None,
    kernel: OffsetKernel | None = None,
) -> ScoreMap:
    """Score every measurement cell with the requested tier."""
    if tier == TIER_SNR_FFT:
        if kernel is None:
            kernel = squared_snr_kernel(params, grid)
        return snr_score_map_fft(post, kernel, grid)
    if tier == TIER_SNR_BRUTE:
        return snr_score_map_bruteforce(post, params, grid)
    if tier in (TIER_EXACT, TIER_EXPECTED):
        centers = grid.meas_centers().reshape(-1, 2)
        if reference is None:
            reference = uniform_posterior(post.grid)
        if tier == TIER_EXACT:
            vals = [eig_exact(post, c, params, quad, reference) for c in centers]
        else:
            vals = [eig_at_expected_measurement(post, c, params, reference) for c in centers]
        return ScoreMap(np.array(vals).reshape(grid.a_cells, grid.b_cells), tier, grid)
    raise ValueError(f"unknown planner tier {tier!r}")


def select_next(scores: ScoreMap, cm: CostModel, agent_pos) -> tuple[float, float]:
    """Measurement cell center maximizing score / movement cost.

    Exact ratio ties resolve to the lowest row-major cell index, so selection
    is deterministic.
    """
    centers = scores.grid.meas_centers().reshape(-1, 2)
    costs = movement_cost(cm, np.asarray(agent_pos, float), centers)
    ratio = scores.values.ravel() / costs
    best = int(np.argmax(ratio))  # first occurrence wins ties
    return scores.grid.meas_cell_center(best)
