"""Multi-agent search episodes with a shared belief.

Each step runs measure -> broadcast -> update -> plan -> move. Every agent's
reading is shared before the single Bayes update, so all agents act on the
same posterior; movement is an instantaneous relocation that pays the cost
model's price. Two sampling baselines (uniform-random and inverse-cost) ride
alongside the information-driven policy for efficiency comparisons.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .belief import (
    MeasurementRecord,
    SourcePosterior,
    info_gain_bits,
    posterior_from_weights,
    posterior_summary,
    posterior_update,
    uniform_posterior,
)
from .field import GridSpec, PlumeParams, concentration, squared_snr_kernel
from .planner import (
    TIER_SNR_FFT,
    CostModel,
    QuadratureSpec,
    compute_score_map,
    movement_cost,
    select_next,
)

POLICY_INFO = "info"
POLICY_COST_ONLY = "cost-only"
POLICY_RANDOM = "random"
POLICIES = (POLICY_INFO, POLICY_COST_ONLY, POLICY_RANDOM)

EPISODE_CSV_COLUMNS = ("step", "agent_id", "x", "y", "m", "ig_bits", "cost")


@dataclass
class AgentState:
    """One agent: position, velocity, and its belief over source cells."""

    id: int
    position: np.ndarray
    velocity: np.ndarray
    belief: SourcePosterior


@dataclass(frozen=True)
class SimConfig:
    """Everything one heuristic episode needs, including its RNG seed."""

    grid: GridSpec
    plume: PlumeParams
    cost: CostModel
    n_agents: int = 5
    n_steps: int = 100
    policy: str = POLICY_INFO
    tier: str = TIER_SNR_FFT
    quad: QuadratureSpec = QuadratureSpec()
    source_xy: tuple[float, float] | None = None  # None: sample from the prior
    prior_weights: tuple | None = None            # None: uniform
    seed: int = 0

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown motion policy {self.policy!r}")
        if self.n_agents < 1 or self.n_steps < 0:
            raise ValueError("need at least one agent and a nonnegative step count")


@dataclass(frozen=True)
class StepRecord:
    """One agent's slice of one step: where it measured and what came of it."""

    step: int
    agent_id: int
    x: float
    y: float
    m: float
    ig_bits: float
    cost: float
    next_x: float
    next_y: float


@dataclass
class EpisodeLog:
    seed: int
    policy: str
    n_steps: int
    n_agents: int
    source_xy: tuple[float, float]
    records: list[StepRecord] = field(default_factory=list)
    prior: SourcePosterior | None = None
    final_posterior: SourcePosterior | None = None
    cumulative_cost: float = 0.0

    def ig_series(self) -> np.ndarray:
        """Shared info gain after each step's update (one value per step)."""
        out = np.empty(self.n_steps)
        for rec in self.records:
            out[rec.step] = rec.ig_bits
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(EPISODE_CSV_COLUMNS)
            for r in self.records:
                writer.writerow(
                    [
                        r.step,
                        r.agent_id,
                        repr(r.x),
                        repr(r.y),
                        repr(r.m),
                        repr(r.ig_bits),
                        repr(r.cost),
                    ]
                )

    def summary(self, ig_thresholds=(10.0,)) -> dict:
        out = {
            "seed": self.seed,
            "policy": self.policy,
            "n_agents": self.n_agents,
            "n_steps": self.n_steps,
            "source_xy": list(self.source_xy),
            "cumulative_cost": self.cumulative_cost,
            "final": posterior_summary(self.final_posterior, self.prior),
        }
        for thr in ig_thresholds:
            out[f"steps_to_ig_{thr:g}"] = steps_to_ig(self, thr)
        return out


def agent_streams(seed: int, n_agents: int):
    """Per-agent RNG streams split so extra agents never shift earlier ones.

    Returns (world_rng, measurement_rngs, policy_rngs); stream k of an agent
    depends only on the seed and the agent id.
    """
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(1 + 2 * n_agents)
    world = np.random.default_rng(children[0])
    meas = [np.random.default_rng(children[1 + 2 * i]) for i in range(n_agents)]
    policy = [np.random.default_rng(children[2 + 2 * i]) for i in range(n_agents)]
    return world, meas, policy


def random_policy(agent: AgentState, rng: np.random.Generator, grid: GridSpec):
    """Uniformly random measurement cell center."""
    return grid.meas_cell_center(int(rng.integers(grid.n_meas_cells)))


def cost_only_policy(
    agent: AgentState, cm: CostModel, rng: np.random.Generator, grid: GridSpec
):
    """Sample a cell with probability proportional to 1 / movement cost."""
    centers = grid.meas_centers().reshape(-1, 2)
    w = 1.0 / movement_cost(cm, agent.position, centers)
    flat = int(rng.choice(w.size, p=w / w.sum()))
    return grid.meas_cell_center(flat)


def _initial_prior(cfg: SimConfig) -> SourcePosterior:
    if cfg.prior_weights is None:
        return uniform_posterior(cfg.grid)
    return posterior_from_weights(cfg.grid, np.asarray(cfg.prior_weights, dtype=float))


def run_episode(cfg: SimConfig) -> EpisodeLog:
    """Run one seeded episode and return its full log."""
    world_rng, meas_rngs, policy_rngs = agent_streams(cfg.seed, cfg.n_agents)
    prior = _initial_prior(cfg)

    if cfg.source_xy is not None:
        source = np.asarray(cfg.source_xy, dtype=float)
    else:
        flat = int(world_rng.choice(cfg.grid.n_src_cells, p=prior.probs().ravel()))
        source = np.asarray(cfg.grid.src_cell_center(flat))
    positions = world_rng.uniform(
        low=(cfg.grid.x_min, cfg.grid.y_min),
        high=(cfg.grid.x_max, cfg.grid.y_max),
        size=(cfg.n_agents, 2),
    )

    agents = [
        AgentState(i, positions[i].copy(), np.zeros(2), prior)
        for i in range(cfg.n_agents)
    ]
    belief = prior
    kernel = None
    if cfg.policy == POLICY_INFO and cfg.tier == TIER_SNR_FFT:
        kernel = squared_snr_kernel(cfg.plume, cfg.grid)

    log = EpisodeLog(
        seed=cfg.seed,
        policy=cfg.policy,
        n_steps=cfg.n_steps,
        n_agents=cfg.n_agents,
        source_xy=(float(source[0]), float(source[1])),
        prior=prior,
    )

    for step in range(cfg.n_steps):
        # measure, in agent-id order, each on its own noise stream
        readings = []
        for agent in agents:
            f = float(concentration(agent.position, source, cfg.plume))
            m = f + cfg.plume.noise_sigma * float(meas_rngs[agent.id].standard_normal())
            readings.append(
                MeasurementRecord(
                    x=float(agent.position[0]),
                    y=float(agent.position[1]),
                    value=m,
                    step=step,
                    agent_id=agent.id,
                )
            )
        # broadcast: every reading reaches every agent before one shared update
        belief = posterior_update(belief, readings, cfg.plume)
        for agent in agents:
            agent.belief = belief
        ig = info_gain_bits(belief, prior)

        scores = None
        if cfg.policy == POLICY_INFO:
            scores = compute_score_map(
                belief, cfg.plume, cfg.grid, cfg.tier, cfg.quad, prior, kernel
            )
        for agent in agents:
            if cfg.policy == POLICY_INFO:
                target = select_next(scores, cfg.cost, agent.position)
            elif cfg.policy == POLICY_COST_ONLY:
                target = cost_only_policy(agent, cfg.cost, policy_rngs[agent.id], cfg.grid)
            else:
                target = random_policy(agent, policy_rngs[agent.id], cfg.grid)
            paid = float(movement_cost(cfg.cost, agent.position, np.asarray(target)))
            log.records.append(
                StepRecord(
                    step=step,
                    agent_id=agent.id,
                    x=float(agent.position[0]),
                    y=float(agent.position[1]),
                    m=readings[agent.id].value,
                    ig_bits=ig,
                    cost=paid,
                    next_x=float(target[0]),
                    next_y=float(target[1]),
                )
            )
            log.cumulative_cost += paid
            agent.position = np.asarray(target, dtype=float)

    log.final_posterior = belief
    return log


def steps_to_ig(log: EpisodeLog, threshold_bits: float) -> int | None:
    """First step whose post-update shared IG reaches the threshold."""
    for step, ig in enumerate(log.ig_series()):
        if ig >= threshold_bits:
            return step
    return None


def read_episode_csv(path) -> list[StepRecord]:
    """Parse an episode CSV back into step records (next_* not stored)."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                StepRecord(
                    step=int(row["step"]),
                    agent_id=int(row["agent_id"]),
                    x=float(row["x"]),
                    y=float(row["y"]),
                    m=float(row["m"]),
                    ig_bits=float(row["ig_bits"]),
                    cost=float(row["cost"]),
                    next_x=float("nan"),
                    next_y=float("nan"),
                )
            )
    return out
