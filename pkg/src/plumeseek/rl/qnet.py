"""Small fully-connected Q-network with hand-rolled backprop.

float64 numpy throughout: training must be bit-reproducible under a fixed
seed, and the analytic gradients are checked against finite differences in
the tests, so there is no autograd framework underneath.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class Transition(NamedTuple):
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    done: bool


class Batch(NamedTuple):
    obs: np.ndarray       # (B, obs_size)
    actions: np.ndarray   # (B,) int
    rewards: np.ndarray   # (B,)
    next_obs: np.ndarray  # (B, obs_size)
    dones: np.ndarray     # (B,) float 0/1


class QNet:
    """MLP with ReLU hidden layers and a linear action-value head."""

    def __init__(self, sizes=(17, 64, 64, 5), rng: np.random.Generator | None = None):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = tuple(int(s) for s in sizes)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)  # He init for the ReLU stack
            self.weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_actions(self) -> int:
        return self.sizes[-1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Action values, shape (batch, n_actions)."""
        h = np.atleast_2d(np.asarray(x, dtype=float))
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if k < last:
                h = np.maximum(h, 0.0)
        return h

    def _forward_cached(self, x: np.ndarray):
        """Forward pass keeping pre-activations for backprop."""
        h = np.atleast_2d(np.asarray(x, dtype=float))
        activations = [h]
        pre = []
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = activations[-1] @ w + b
            pre.append(z)
            activations.append(np.maximum(z, 0.0) if k < last else z)
        return activations, pre

    def clone(self) -> "QNet":
        twin = QNet.__new__(QNet)
        twin.sizes = self.sizes
        twin.weights = [w.copy() for w in self.weights]
        twin.biases = [b.copy() for b in self.biases]
        return twin

    def copy_from(self, other: "QNet") -> None:
        if other.sizes != self.sizes:
            raise ValueError("cannot sync networks of different shapes")
        self.weights = [w.copy() for w in other.weights]
        self.biases = [b.copy() for b in other.biases]

    def save(self, path) -> None:
        payload = {
            "sizes": list(self.sizes),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "QNet":
        with open(path) as fh:
            payload = json.load(fh)
        net = cls.__new__(cls)
        net.sizes = tuple(payload["sizes"])
        net.weights = [np.array(w, dtype=float) for w in payload["weights"]]
        net.biases = [np.array(b, dtype=float) for b in payload["biases"]]
        expect = list(zip(net.sizes[:-1], net.sizes[1:]))
        got = [w.shape for w in net.weights]
        if got != expect or any(
            b.shape != (n,) for b, (_, n) in zip(net.biases, expect)
        ):
            raise ValueError("checkpoint layer shapes disagree with header")
        return net


def loss_and_grads(net: QNet, obs: np.ndarray, actions: np.ndarray, targets: np.ndarray):
    """Mean squared TD error on the taken actions, plus its exact gradient.

    Returns (loss, weight_grads, bias_grads) without touching net parameters.
    """
    acts, pre = net._forward_cached(obs)
    q = acts[-1]
    batch = q.shape[0]
    idx = np.arange(batch)
    taken = q[idx, actions]
    err = taken - targets
    loss = float(np.mean(err * err))

    dq = np.zeros_like(q)
    dq[idx, actions] = 2.0 * err / batch
    w_grads = [None] * len(net.weights)
    b_grads = [None] * len(net.biases)
    delta = dq
    for k in range(len(net.weights) - 1, -1, -1):
        w_grads[k] = acts[k].T @ delta
        b_grads[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ net.weights[k].T) * (pre[k - 1] > 0.0)
    return loss, w_grads, b_grads


def td_train_step(
    net: QNet, target_net: QNet, batch: Batch, gamma: float, lr: float
) -> float:
    """One SGD step on the TD(0) target; returns the pre-step loss."""
    next_q = target_net.forward(batch.next_obs)
    targets = batch.rewards + gamma * (1.0 - batch.dones) * next_q.max(axis=1)
    loss, w_grads, b_grads = loss_and_grads(net, batch.obs, batch.actions, targets)
    for w, g in zip(net.weights, w_grads):
        w -= lr * g
    for b, g in zip(net.biases, b_grads):
        b -= lr * g
    return loss


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._pos = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, t: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(t)
        else:
            self._items[self._pos] = t  # overwrite oldest first
        self._pos = (self._pos + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if not self._items:
            raise ValueError("cannot sample from an empty buffer")
        picks = rng.integers(0, len(self._items), size=batch_size)
        rows = [self._items[int(i)] for i in picks]
        return Batch(
            obs=np.stack([r.obs for r in rows]),
            actions=np.array([r.action for r in rows], dtype=int),
            rewards=np.array([r.reward for r in rows], dtype=float),
            next_obs=np.stack([r.next_obs for r in rows]),
            dones=np.array([float(r.done) for r in rows]),
        )


def epsilon(
    step: int, start: float = 1.0, end: float = 0.05, decay_steps: int = 10_000
) -> float:
    """Linear exploration schedule, clamped at `end` after decay_steps."""
    if decay_steps < 1:
        return end
    frac = min(max(step, 0) / decay_steps, 1.0)
    if frac >= 1.0:
        return end  # land exactly on the floor, no arithmetic residue
    return start + (end - start) * frac
