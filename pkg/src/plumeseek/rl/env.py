"""Per-agent control environment layered on the grid Bayes filter.

Agents no longer follow the planner directly; a discrete action chooses
between idling, moving toward the current best estimate, sensing, folding
buffered readings into the belief, or pulling peers' freshest readings.
Beliefs are per agent here, unlike the fully shared heuristic episodes, so
communication is a real choice with a real price.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..belief import (
    MeasurementRecord,
    SourcePosterior,
    info_gain_bits,
    map_estimate,
    posterior_from_weights,
    posterior_update,
    uniform_posterior,
)
from ..field import GridSpec, PlumeParams, concentration

OBS_SIZE = 17

# Observation layout (all entries normalized; see HybridEnv._observe):
#  0,1  position            2,3  velocity        4,5  wind
#  6    latest reading      7,8  source estimate 9    info gain so far
#  10   moved-since-last-measurement flag
#  11   same-action-repeated-more-than-4-times flag
#  12..16 one-hot of the previous action
OBS_POS = slice(0, 2)
OBS_VEL = slice(2, 4)
OBS_WIND = slice(4, 6)
OBS_LAST_M = 6
OBS_ESTIMATE = slice(7, 9)
OBS_IG = 9
OBS_MOVED_FLAG = 10
OBS_REPEAT_FLAG = 11
OBS_LAST_ACTION = slice(12, 17)


class Action(enum.IntEnum):
    DO_NOTHING = 0
    MOVE = 1
    MEASURE = 2
    UPDATE = 3
    COMMUNICATE = 4

N_ACTIONS = len(Action)


class EpisodeDone(RuntimeError):
    """step() was called on a finished episode."""


@dataclass(frozen=True)
class RewardWeights:
    """Reward term weights and per-action costs.

    reward = w_info * (info gain this step, bits)
           + w_est * (1 - estimate_error / world_diagonal)
           - action cost
    """

    w_info: float = 1.0
    w_est: float = 1.0
    c_nothing: float = 0.0
    c_move: float = 0.2
    c_measure: float = 0.1
    c_update: float = 0.1
    c_comm: float = 0.3

    def action_cost(self, action: int) -> float:
        return (self.c_nothing, self.c_move, self.c_measure, self.c_update, self.c_comm)[
            int(action)
        ]


@dataclass(frozen=True)
class HybridEnvConfig:
    grid: GridSpec
    plume: PlumeParams
    n_agents: int = 3
    horizon: int = 200
    a_max: float = 0.5        # fixed acceleration magnitude for Move
    damping: float = 0.95     # velocity retained per step before the kick
    v_max: float = 1.0
    dt: float = 1.0
    w_max: float = 1.0        # wind normalization scale for observations
    buffer_capacity: int = 4  # unfolded readings kept per agent
    reward: RewardWeights = field(default_factory=RewardWeights)
    source_xy: tuple[float, float] | None = None
    prior_weights: tuple | None = None

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError("need at least one agent")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if min(self.a_max, self.v_max, self.dt, self.w_max) <= 0:
            raise ValueError("a_max, v_max, dt and w_max must be > 0")
        if not 0.0 <= self.damping <= 1.0:
            raise ValueError("damping must be in [0, 1]")
        if self.buffer_capacity < 1:
            raise ValueError("buffer_capacity must be >= 1")


class HybridEnv:
    """Multi-agent episode with per-agent beliefs and discrete control."""

    def __init__(self, cfg: HybridEnvConfig):
        self.cfg = cfg
        self._prior = (
            uniform_posterior(cfg.grid)
            if cfg.prior_weights is None
            else posterior_from_weights(cfg.grid, np.asarray(cfg.prior_weights, float))
        )
        self._done = True

    @property
    def prior(self) -> SourcePosterior:
        return self._prior

    @property
    def done(self) -> bool:
        return self._done

    @property
    def beliefs(self) -> list[SourcePosterior]:
        return list(self._beliefs)

    @property
    def source(self) -> np.ndarray:
        return self._source.copy()

    @property
    def positions(self) -> np.ndarray:
        return self._pos.copy()

    @property
    def velocities(self) -> np.ndarray:
        return self._vel.copy()

    def reset(self, seed: int = 0) -> np.ndarray:
        cfg = self.cfg
        ss = np.random.SeedSequence(seed)
        children = ss.spawn(1 + cfg.n_agents)
        world = np.random.default_rng(children[0])
        self._meas_rngs = [np.random.default_rng(c) for c in children[1:]]

        if cfg.source_xy is not None:
            self._source = np.asarray(cfg.source_xy, dtype=float)
        else:
            flat = int(world.choice(cfg.grid.n_src_cells, p=self._prior.probs().ravel()))
            self._source = np.asarray(cfg.grid.src_cell_center(flat))
        self._pos = world.uniform(
            low=(cfg.grid.x_min, cfg.grid.y_min),
            high=(cfg.grid.x_max, cfg.grid.y_max),
            size=(cfg.n_agents, 2),
        )
        self._vel = np.zeros((cfg.n_agents, 2))
        self._beliefs = [self._prior] * cfg.n_agents
        self._buffers = [[] for _ in range(cfg.n_agents)]
        self._latest: list[tuple[int, MeasurementRecord] | None] = [None] * cfg.n_agents
        self._next_meas_id = 1
        # consumed[i, j]: id of agent j's newest reading already folded into i
        self._consumed = np.zeros((cfg.n_agents, cfg.n_agents), dtype=int)
        self._last_m = np.zeros(cfg.n_agents)
        self._last_action = np.full(cfg.n_agents, -1, dtype=int)
        self._repeat_count = np.zeros(cfg.n_agents, dtype=int)
        self._moved_since_measure = np.zeros(cfg.n_agents, dtype=bool)
        self._igs = np.zeros(cfg.n_agents)
        self._estimates = np.tile(map_estimate(self._prior)[1], (cfg.n_agents, 1))
        self.t = 0
        self._done = False
        return self._observe()

    # -- action effects -----------------------------------------------------

    def _do_move(self, i: int) -> None:
        cfg = self.cfg
        target = self._estimates[i]
        delta = target - self._pos[i]
        dist = float(np.hypot(*delta))
        accel = (cfg.a_max / dist) * delta if dist > 0 else np.zeros(2)
        v = cfg.damping * self._vel[i] + accel * cfg.dt
        speed = float(np.hypot(*v))
        if speed > cfg.v_max:
            v *= cfg.v_max / speed
        pos = self._pos[i] + v * cfg.dt
        # walls are sticky: clamp and zero the offending velocity component
        for axis, (lo, hi) in enumerate(
            ((cfg.grid.x_min, cfg.grid.x_max), (cfg.grid.y_min, cfg.grid.y_max))
        ):
            if pos[axis] < lo:
                pos[axis] = lo
                v[axis] = 0.0
            elif pos[axis] > hi:
                pos[axis] = hi
                v[axis] = 0.0
        self._pos[i] = pos
        self._vel[i] = v
        self._moved_since_measure[i] = True

    def _do_measure(self, i: int) -> None:
        cfg = self.cfg
        f = float(concentration(self._pos[i], self._source, cfg.plume))
        m = f + cfg.plume.noise_sigma * float(self._meas_rngs[i].standard_normal())
        rec = MeasurementRecord(
            x=float(self._pos[i][0]),
            y=float(self._pos[i][1]),
            value=m,
            step=self.t,
            agent_id=i,
        )
        buf = self._buffers[i]
        buf.append(rec)
        if len(buf) > cfg.buffer_capacity:
            buf.pop(0)
        self._latest[i] = (self._next_meas_id, rec)
        self._next_meas_id += 1
        self._last_m[i] = m
        self._moved_since_measure[i] = False

    def _refresh_belief_stats(self, i: int) -> None:
        self._igs[i] = info_gain_bits(self._beliefs[i], self._prior)
        self._estimates[i] = map_estimate(self._beliefs[i])[1]

    def _do_update(self, i: int) -> None:
        if not self._buffers[i]:
            return
        self._beliefs[i] = posterior_update(self._beliefs[i], self._buffers[i], self.cfg.plume)
        self._buffers[i] = []
        self._refresh_belief_stats(i)

    def _do_communicate(self, i: int) -> None:
        fresh = []
        for j in range(self.cfg.n_agents):
            if j == i or self._latest[j] is None:
                continue
            mid, rec = self._latest[j]
            if mid > self._consumed[i, j]:  # each reading is evidence once
                fresh.append(rec)
                self._consumed[i, j] = mid
        if fresh:
            self._beliefs[i] = posterior_update(self._beliefs[i], fresh, self.cfg.plume)
            self._refresh_belief_stats(i)

    # -- step/observe ---------------------------------------------------------

    def step(self, actions) -> tuple[np.ndarray, np.ndarray, bool]:
        if self._done:
            raise EpisodeDone("episode is over; call reset()")
        actions = [int(a) for a in actions]
        if len(actions) != self.cfg.n_agents:
            raise ValueError("one action per agent required")
        for a in actions:
            if not 0 <= a < N_ACTIONS:
                raise ValueError(f"action {a} out of range")

        prev_ig = self._igs.copy()
        handlers = {
            Action.DO_NOTHING: lambda i: None,
            Action.MOVE: self._do_move,
            Action.MEASURE: self._do_measure,
            Action.UPDATE: self._do_update,
            Action.COMMUNICATE: self._do_communicate,
        }
        for i, a in enumerate(actions):  # effects resolve in agent-id order
            handlers[Action(a)](i)
            if a == self._last_action[i]:
                self._repeat_count[i] += 1
            else:
                self._repeat_count[i] = 1
            self._last_action[i] = a

        rewards = np.empty(self.cfg.n_agents)
        for i, a in enumerate(actions):
            parts = self.reward_components(i, a, self._igs[i] - prev_ig[i])
            rewards[i] = parts["info"] + parts["estimate"] - parts["action_cost"]

        self.t += 1
        self._done = self.t >= self.cfg.horizon
        return self._observe(), rewards, self._done

    def reward_components(self, i: int, action: int, delta_ig_bits: float) -> dict:
        """The three reward terms, exposed separately for diagnostics."""
        w = self.cfg.reward
        err = float(np.hypot(*(self._estimates[i] - self._source)))
        return {
            "info": w.w_info * delta_ig_bits,
            "estimate": w.w_est * (1.0 - err / self.cfg.grid.diagonal),
            "action_cost": w.action_cost(action),
        }

    def _observe(self) -> np.ndarray:
        cfg = self.cfg
        g = cfg.grid
        obs = np.zeros((cfg.n_agents, OBS_SIZE))
        span = np.array([g.x_max - g.x_min, g.y_max - g.y_min])
        origin = np.array([g.x_min, g.y_min])
        max_ig = np.log2(g.n_src_cells)
        for i in range(cfg.n_agents):
            obs[i, OBS_POS] = (self._pos[i] - origin) / span
            obs[i, OBS_VEL] = self._vel[i] / cfg.v_max
            obs[i, OBS_WIND] = np.clip(np.asarray(cfg.plume.wind) / cfg.w_max, -1.0, 1.0)
            obs[i, OBS_LAST_M] = np.clip(self._last_m[i], 0.0, 1.0)
            obs[i, OBS_ESTIMATE] = (self._estimates[i] - origin) / span
            obs[i, OBS_IG] = np.clip(self._igs[i] / max_ig, 0.0, 1.0) if max_ig > 0 else 0.0
            obs[i, OBS_MOVED_FLAG] = float(self._moved_since_measure[i])
            obs[i, OBS_REPEAT_FLAG] = float(self._repeat_count[i] > 4)
            if self._last_action[i] >= 0:
                obs[i, OBS_LAST_ACTION.start + self._last_action[i]] = 1.0
        return obs
