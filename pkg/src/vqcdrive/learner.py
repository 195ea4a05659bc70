"""Q-learning loop shared by the quantum and classical backends.

Epsilon-greedy control, FIFO experience replay, TD targets from a
periodically synchronized target network (optionally double-Q), mean squared
TD loss over the minibatch, and plain SGD.  Both Q-function backends expose
the same surface, so the training loop, metrics, and environment stream are
byte-identical across them.
"""

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import neural, quantum
from .errors import TrainingError
from .seeding import TAG_ENV, TAG_EXPLORE, TAG_REPLAY, fold64, substream

N_ACTIONS = quantum.N_ACTIONS


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    done: bool


class ReplayMemory:
    """Fixed-capacity ring buffer with strictly FIFO eviction."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items = []
        self._cursor = 0

    def push(self, tr: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(tr)
        else:
            self._items[self._cursor] = tr
            self._cursor = (self._cursor + 1) % self.capacity

    def __len__(self) -> int:
        return len(self._items)

    def sample(self, rng: np.random.Generator, m: int) -> list:
        if m < 1 or m > len(self._items):
            raise ValueError(f"cannot sample {m} of {len(self._items)} transitions")
        idx = rng.choice(len(self._items), size=m, replace=False)
        return [self._items[i] for i in idx]


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.9
    lr: float = 1e-3
    batch_size: int = 32
    capacity: int = 10_000
    target_sync_period: int = 100
    epsilon_start: float = 1.0
    epsilon_min: float = 0.05
    epsilon_decay: float = 0.98   # multiplicative, per episode
    double_q: bool = False
    warmup: int = 500             # transitions required before updates begin

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 < self.epsilon_min <= self.epsilon_start <= 1.0:
            raise ValueError("require 0 < epsilon_min <= epsilon_start <= 1")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ValueError("epsilon_decay must lie in (0, 1]")
        if self.lr <= 0 or self.batch_size < 1 or self.target_sync_period < 1:
            raise ValueError("lr/batch_size/target_sync_period invalid")
        if self.capacity < self.batch_size:
            raise ValueError("capacity must be >= batch_size")


class QFunction:
    """Common surface of the two Q-value backends."""

    n_actions = N_ACTIONS

    def q_values(self, features: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def q_values_batch(self, features: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_chosen(self, features: np.ndarray, action: int) -> dict:
        """Gradient of Q[action] w.r.t. every parameter, keyed like get_params."""
        raise NotImplementedError

    def td_step(self, features: np.ndarray, actions: np.ndarray,
                targets: np.ndarray, lr: float) -> None:
        """One SGD step on the mean squared TD error of the minibatch."""
        raise NotImplementedError

    def get_params(self) -> dict:
        raise NotImplementedError

    def set_params(self, params: dict) -> None:
        raise NotImplementedError

    def architecture(self) -> tuple:
        raise NotImplementedError


def _check_finite(grads: dict) -> None:
    for name, g in grads.items():
        arr = np.asarray(g)
        if not np.isfinite(arr).all():
            worst = float(np.nanmax(np.abs(arr)))
            raise TrainingError(
                f"non-finite gradient in {name!r} (max |entry| {worst}); "
                "reduce the learning rate or reward scale"
            )


class VqcQ(QFunction):
    """Quantum-circuit Q-function (parameter-shift gradients)."""

    def __init__(self, params: Optional[quantum.VqcParams] = None,
                 seed: Optional[int] = None, init: str = "uniform",
                 init_scale: float = 0.1):
        if params is None:
            rng = substream(0 if seed is None else seed)
            params = quantum.init_params(rng, scheme=init, scale=init_scale)
        self.params = params

    def q_values(self, features):
        return quantum.q_values(self.params, features)

    def q_values_batch(self, features):
        return quantum.q_values_batch(self.params, features)

    def grad_chosen(self, features, action):
        theta_grad, w_exp = quantum.parameter_shift_grad(self.params, features, action)
        w_grad = np.zeros(N_ACTIONS)
        w_grad[int(action)] = w_exp
        return {"theta": theta_grad, "action_weights": w_grad}

    def td_step(self, features, actions, targets, lr):
        acts = np.asarray(actions, dtype=np.intp)
        base, jac = quantum.shift_bundle(self.params, features, acts)
        w_a = self.params.action_weights[acts]
        q_pred = w_a * base
        coeff = 2.0 * (q_pred - np.asarray(targets)) / len(acts)
        theta_grad = (jac.T @ (coeff * w_a)).reshape(quantum.THETA_SHAPE)
        w_grad = np.zeros(N_ACTIONS)
        np.add.at(w_grad, acts, coeff * base)
        _check_finite({"theta": theta_grad, "action_weights": w_grad})
        self.params.theta -= lr * theta_grad
        self.params.action_weights -= lr * w_grad

    def get_params(self):
        return {"theta": self.params.theta.copy(),
                "action_weights": self.params.action_weights.copy()}

    def set_params(self, params):
        self.params = quantum.VqcParams(
            np.array(params["theta"], dtype=np.float64),
            np.array(params["action_weights"], dtype=np.float64),
        )

    def architecture(self):
        return ("vqc", quantum.N_QUBITS, quantum.N_LAYERS, N_ACTIONS)


class NeuralQ(QFunction):
    """Classical fully-connected Q-function (reverse-mode gradients)."""

    def __init__(self, net: Optional[neural.Mlp] = None, seed: Optional[int] = None):
        if net is None:
            net = neural.Mlp(rng=substream(0 if seed is None else seed))
        self.net = net

    def q_values(self, features):
        return self.net.forward(features)[0]

    def q_values_batch(self, features):
        return self.net.forward(features)

    def grad_chosen(self, features, action):
        out_grad = np.zeros((1, N_ACTIONS))
        out_grad[0, int(action)] = 1.0
        w_grads, b_grads = self.net.backward(features, out_grad)
        grads = {}
        for i, (wg, bg) in enumerate(zip(w_grads, b_grads)):
            grads[f"w{i}"] = wg
            grads[f"b{i}"] = bg
        return grads

    def td_step(self, features, actions, targets, lr):
        feats = np.atleast_2d(np.asarray(features, dtype=np.float64))
        acts = np.asarray(actions, dtype=np.intp)
        q_all = self.net.forward(feats)
        q_pred = q_all[np.arange(len(acts)), acts]
        coeff = 2.0 * (q_pred - np.asarray(targets)) / len(acts)
        out_grad = np.zeros_like(q_all)
        out_grad[np.arange(len(acts)), acts] = coeff
        w_grads, b_grads = self.net.backward(feats, out_grad)
        _check_finite({f"w{i}": g for i, g in enumerate(w_grads)})
        _check_finite({f"b{i}": g for i, g in enumerate(b_grads)})
        for i in range(len(self.net.weights)):
            self.net.weights[i] -= lr * w_grads[i]
            self.net.biases[i] -= lr * b_grads[i]

    def get_params(self):
        return self.net.get_params()

    def set_params(self, params):
        self.net.set_params(params)

    def architecture(self):
        return ("neural",) + self.net.sizes


def select_action(q: QFunction, features: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy: uniform over 15 actions w.p. epsilon, else argmax.

    Ties break to the lowest action index.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return int(np.argmax(q.q_values(features)))


def td_target(tr: Transition, target_q: QFunction, online_q: QFunction,
              gamma: float, double_q: bool = False) -> float:
    """Bootstrapped target; terminal transitions ignore the next state."""
    if tr.done:
        return float(tr.r)
    target_next = target_q.q_values(tr.s_next)
    if double_q:
        best = int(np.argmax(online_q.q_values(tr.s_next)))
        return float(tr.r + gamma * target_next[best])
    return float(tr.r + gamma * np.max(target_next))


def td_targets_batch(batch: list, target_q: QFunction, online_q: QFunction,
                     gamma: float, double_q: bool = False) -> np.ndarray:
    s_next = np.stack([tr.s_next for tr in batch])
    rewards = np.array([tr.r for tr in batch])
    live = np.array([0.0 if tr.done else 1.0 for tr in batch])
    target_next = target_q.q_values_batch(s_next)
    if double_q:
        best = np.argmax(online_q.q_values_batch(s_next), axis=1)
        boot = target_next[np.arange(len(batch)), best]
    else:
        boot = np.max(target_next, axis=1)
    return rewards + gamma * live * boot


def loss(q: QFunction, batch: list, targets) -> float:
    """Mean squared TD error over the minibatch."""
    if len(batch) == 0:
        raise ValueError("loss requires a non-empty batch")
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != (len(batch),):
        raise ValueError("targets must match the batch length")
    feats = np.stack([tr.s for tr in batch])
    acts = np.array([tr.a for tr in batch], dtype=np.intp)
    preds = q.q_values_batch(feats)[np.arange(len(batch)), acts]
    return float(np.mean((preds - targets) ** 2))


def gradient_step(q: QFunction, batch: list, targets, lr: float) -> None:
    """theta <- theta - lr * grad of the mean squared TD error.

    Per-sample chain rule 2 (Q - y) dQ/dtheta; targets are constants.
    """
    if len(batch) == 0:
        raise ValueError("gradient_step requires a non-empty batch")
    feats = np.stack([tr.s for tr in batch])
    acts = np.array([tr.a for tr in batch], dtype=np.intp)
    q.td_step(feats, acts, np.asarray(targets, dtype=np.float64), lr)


def sync_target(online: QFunction, target: QFunction) -> None:
    """Copy online parameters into the target Q-function, value exact."""
    if online.architecture() != target.architecture():
        raise TrainingError(
            f"architecture mismatch: {online.architecture()} vs {target.architecture()}"
        )
    target.set_params(online.get_params())


@dataclass(frozen=True)
class EpisodeMetrics:
    episode: int
    steps: int
    sum_r_tran: float
    sum_r_tele: float
    sum_total: float
    collided: int
    ho_count: int
    epsilon: float
    wallclock_ms: float


def train(env, online: QFunction, target: QFunction, cfg: AgentConfig,
          episodes: int, seed: int) -> list:
    """Run the replay/target-network Q-learning loop.

    The environment owns all of its randomness through the per-episode seed
    fold64(seed, TAG_ENV, episode); exploration and replay sampling use
    separate substreams, so the environment stream is identical across
    backends.  Epsilon decays multiplicatively after every episode, floored
    at epsilon_min.  Gradient updates start once the replay holds
    max(warmup, batch_size) transitions, and the target parameters are
    re-synced every target_sync_period environment steps.
    """
    explore_rng = substream(seed, TAG_EXPLORE)
    replay_rng = substream(seed, TAG_REPLAY)
    replay = ReplayMemory(cfg.capacity)
    sync_target(online, target)
    epsilon = cfg.epsilon_start
    min_fill = max(cfg.warmup, cfg.batch_size)
    metrics = []
    global_step = 0
    for episode in range(episodes):
        start = time.perf_counter()
        obs = env.reset(fold64(seed, TAG_ENV, episode))
        done = False
        steps = 0
        sum_tran = sum_tele = sum_total = 0.0
        collided = 0
        ho_count = 0
        while not done:
            action = select_action(online, obs.features, epsilon, explore_rng)
            next_obs, rewards, done, info = env.step(action)
            replay.push(Transition(obs.features, action, rewards.total,
                                   next_obs.features, done))
            if len(replay) >= min_fill:
                batch = replay.sample(replay_rng, cfg.batch_size)
                targets = td_targets_batch(batch, target, online,
                                           cfg.gamma, cfg.double_q)
                gradient_step(online, batch, targets, cfg.lr)
            global_step += 1
            if global_step % cfg.target_sync_period == 0:
                sync_target(online, target)
            steps += 1
            sum_tran += rewards.r_tran
            sum_tele += rewards.r_tele
            sum_total += rewards.total
            collided = max(collided, int(info.get("delta", 0)))
            ho_count = int(info.get("ho_count", ho_count))
            obs = next_obs
        wallclock_ms = (time.perf_counter() - start) * 1e3
        metrics.append(EpisodeMetrics(episode, steps, sum_tran, sum_tele,
                                      sum_total, collided, ho_count, epsilon,
                                      wallclock_ms))
        epsilon = max(cfg.epsilon_min, epsilon * cfg.epsilon_decay)
    return metrics


def evaluate(env, q: QFunction, episodes: int, seed: int) -> list:
    """Greedy rollouts (epsilon = 0) without parameter updates."""
    greedy_rng = substream(seed, TAG_EXPLORE)
    metrics = []
    for episode in range(episodes):
        start = time.perf_counter()
        obs = env.reset(fold64(seed, TAG_ENV, episode))
        done = False
        steps = 0
        sum_tran = sum_tele = sum_total = 0.0
        collided = 0
        ho_count = 0
        while not done:
            action = select_action(q, obs.features, 0.0, greedy_rng)
            obs, rewards, done, info = env.step(action)
            steps += 1
            sum_tran += rewards.r_tran
            sum_tele += rewards.r_tele
            sum_total += rewards.total
            collided = max(collided, int(info.get("delta", 0)))
            ho_count = int(info.get("ho_count", ho_count))
        wallclock_ms = (time.perf_counter() - start) * 1e3
        metrics.append(EpisodeMetrics(episode, steps, sum_tran, sum_tele,
                                      sum_total, collided, ho_count, 0.0,
                                      wallclock_ms))
    return metrics
