"""DQN training loop over the hybrid control environment.

Each agent trains its own network against its own target copy and replay
buffer. In individual mode the Communicate action is masked out: greedy
selection never considers it and an exploratory draw of it lands on
DoNothing, so no transition ever records it.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .env import Action, HybridEnv, HybridEnvConfig, N_ACTIONS
from .qnet import QNet, ReplayBuffer, Transition, epsilon, td_train_step

MODE_INDIVIDUAL = "individual"
MODE_COMMUNICATING = "communicating"
MODES = (MODE_INDIVIDUAL, MODE_COMMUNICATING)

CURVES_CSV_COLUMNS = ("step", "agent_id", "smoothed_reward")


@dataclass(frozen=True)
class TrainConfig:
    env: HybridEnvConfig
    mode: str = MODE_COMMUNICATING
    train_steps: int = 10_000
    hidden: tuple[int, ...] = (64, 64)
    batch_size: int = 32
    replay_capacity: int = 10_000
    gamma: float = 0.95
    learning_rate: float = 1e-3
    target_sync: int = 500
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 10_000
    smoothing: float = 0.02  # EMA weight for the reported reward curves
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown training mode {self.mode!r}")
        if self.train_steps < 0:
            raise ValueError("train_steps must be >= 0")
        if not 0.0 < self.smoothing <= 1.0:
            raise ValueError("smoothing must be in (0, 1]")


@dataclass
class TrainResult:
    mode: str
    seed: int
    curves: np.ndarray                 # (train_steps, n_agents) smoothed reward
    nets: list[QNet]
    n_episodes: int
    transitions: list[list[Transition]] | None = field(default=None, repr=False)


def greedy_action(q_row: np.ndarray, mode: str) -> int:
    """Argmax action; individual mode never considers Communicate."""
    if mode == MODE_INDIVIDUAL:
        return int(np.argmax(q_row[: Action.COMMUNICATE]))
    return int(np.argmax(q_row))


def train(cfg: TrainConfig, record_transitions: bool = False) -> TrainResult:
    """Run seeded DQN training and return per-agent smoothed reward curves."""
    n_agents = cfg.env.n_agents
    ss = np.random.SeedSequence(cfg.seed)
    children = ss.spawn(1 + 2 * n_agents)
    episode_seeder = np.random.default_rng(children[0])
    nets = [
        QNet((17, *cfg.hidden, N_ACTIONS), np.random.default_rng(children[1 + 2 * i]))
        for i in range(n_agents)
    ]
    explore_rngs = [np.random.default_rng(children[2 + 2 * i]) for i in range(n_agents)]
    targets = [net.clone() for net in nets]
    buffers = [ReplayBuffer(cfg.replay_capacity) for _ in range(n_agents)]

    env = HybridEnv(cfg.env)
    curves = np.zeros((cfg.train_steps, n_agents))
    ema = np.zeros(n_agents)
    logged = [[] for _ in range(n_agents)] if record_transitions else None

    step = 0
    n_episodes = 0
    while step < cfg.train_steps:
        obs = env.reset(seed=int(episode_seeder.integers(2**31)))
        n_episodes += 1
        done = False
        while not done and step < cfg.train_steps:
            eps = epsilon(step, cfg.eps_start, cfg.eps_end, cfg.eps_decay_steps)
            actions = []
            for i in range(n_agents):
                if explore_rngs[i].random() < eps:
                    a = int(explore_rngs[i].integers(N_ACTIONS))
                else:
                    a = greedy_action(nets[i].forward(obs[i])[0], cfg.mode)
                if cfg.mode == MODE_INDIVIDUAL and a == Action.COMMUNICATE:
                    a = int(Action.DO_NOTHING)
                actions.append(a)
            next_obs, rewards, done = env.step(actions)
            for i in range(n_agents):
                t = Transition(obs[i].copy(), actions[i], float(rewards[i]), next_obs[i].copy(), done)
                buffers[i].push(t)
                if logged is not None:
                    logged[i].append(t)
                if len(buffers[i]) >= cfg.batch_size:
                    td_train_step(
                        nets[i],
                        targets[i],
                        buffers[i].sample(cfg.batch_size, explore_rngs[i]),
                        cfg.gamma,
                        cfg.learning_rate,
                    )
            if step == 0:
                ema[:] = rewards
            else:
                ema += cfg.smoothing * (rewards - ema)
            curves[step] = ema
            obs = next_obs
            step += 1
            if step % cfg.target_sync == 0:
                for net, tgt in zip(nets, targets):
                    tgt.copy_from(net)

    return TrainResult(
        mode=cfg.mode,
        seed=cfg.seed,
        curves=curves,
        nets=nets,
        n_episodes=n_episodes,
        transitions=logged,
    )


def curves_to_csv(result: TrainResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVES_CSV_COLUMNS)
        for step in range(result.curves.shape[0]):
            for agent in range(result.curves.shape[1]):
                writer.writerow([step, agent, repr(float(result.curves[step, agent]))])


def read_curves_csv(path) -> np.ndarray:
    """Load a curves CSV back into an (n_steps, n_agents) array."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append((int(row["step"]), int(row["agent_id"]), float(row["smoothed_reward"])))
    if not rows:
        return np.zeros((0, 0))
    n_steps = max(r[0] for r in rows) + 1
    n_agents = max(r[1] for r in rows) + 1
    out = np.zeros((n_steps, n_agents))
    for s, a, v in rows:
        out[s, a] = v
    return out
