"""Distance-to-goal estimators, replay buffers and the mixed training batch.

Two backends share one contract: ``evaluate_batch`` returns nonnegative
distances, ``fit_batch`` takes one mean-squared-error step on a list of
training samples.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .domains import DomainError, Instance, State
from .gvi import GVI, PLAN, TrainingSample

CHECKPOINT_VERSION = 1


class EstimatorError(ValueError):
    pass


@dataclass
class TrainReport:
    batch_size: int
    loss_before: float
    loss_after: float
    n_plan: int = 0
    n_gvi: int = 0


def _check_targets(batch: Sequence[TrainingSample]) -> np.ndarray:
    if not batch:
        raise EstimatorError("empty training batch")
    t = np.array([s.target for s in batch], dtype=float)
    if not np.all(np.isfinite(t)):
        raise EstimatorError("non-finite training target")
    return t


def _count_sources(batch):
    n_plan = sum(1 for s in batch if s.source == PLAN)
    return n_plan, len(batch) - n_plan


class TabularEstimator:
    """Lookup table with lazy uniform ``[0, init_range)`` initialisation.

    A missing entry's initial value is a pure function of (seed, state key),
    so evaluation never mutates the table and needs no pre-enumeration.
    """

    backend = "tabular"

    def __init__(self, init_range: float = 50.0, lr: float = 1.0, seed: int = 0):
        self.init_range = float(init_range)
        self.lr = float(lr)
        self.seed = int(seed)
        self.table: dict = {}

    def _initial(self, key) -> float:
        digest = hashlib.blake2b(f"{self.seed}|{key!r}".encode(), digest_size=8).digest()
        return self.init_range * (int.from_bytes(digest, "little") / 2.0**64)

    def value(self, key) -> float:
        v = self.table.get(key)
        return self._initial(key) if v is None else v

    def evaluate(self, state: State, inst: Instance) -> float:
        return max(self.value(inst.value_key(state)), 0.0)

    def evaluate_batch(self, states: Sequence[State], inst: Instance) -> np.ndarray:
        return np.array([self.evaluate(s, inst) for s in states], dtype=float)

    def loss(self, batch: Sequence[TrainingSample]) -> float:
        t = _check_targets(batch)
        v = np.array([self.value(s.inst.value_key(s.state)) for s in batch])
        return float(np.mean((v - t) ** 2))

    def fit_batch(self, batch: Sequence[TrainingSample]) -> TrainReport:
        before = self.loss(batch)
        for s in batch:
            key = s.inst.value_key(s.state)
            v = self.value(key)
            self.table[key] = max(v + self.lr * (s.target - v), 0.0)
        return TrainReport(len(batch), before, self.loss(batch), *_count_sources(batch))

    def parameter_digest(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        for k in sorted(self.table, key=repr):
            h.update(f"{k!r}={self.table[k]!r};".encode())
        return h.hexdigest()

    def config(self) -> dict:
        return {"backend": self.backend, "init_range": self.init_range, "lr": self.lr, "seed": self.seed}

    def copy(self) -> "TabularEstimator":
        other = TabularEstimator(self.init_range, self.lr, self.seed)
        other.table = dict(self.table)
        return other


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class MlpEstimator:
    """Fully connected ReLU network with a softplus output, trained by SGD.

    Inputs are per-domain encodings zero padded to ``input_shape``.
    """

    backend = "net"

    def __init__(
        self,
        input_shape: tuple[int, ...],
        hidden: Sequence[int] = (128, 128),
        lr: float = 1e-3,
        seed: int = 0,
        optimizer: str = "sgd",
        momentum: float = 0.0,
    ):
        self.input_shape = tuple(int(v) for v in input_shape)
        self.hidden = tuple(int(v) for v in hidden)
        self.lr = float(lr)
        self.seed = int(seed)
        self.optimizer = optimizer
        self.momentum = float(momentum)
        if optimizer not in ("sgd", "adam"):
            raise EstimatorError(f"unknown optimizer {optimizer!r}")
        rng = np.random.default_rng(self.seed)
        sizes = (self.input_dim, *self.hidden, 1)
        self.params: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            self.params.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
            self.params.append(np.zeros(fan_out))
        self._slots = [np.zeros_like(p) for p in self.params]
        self._slots2 = [np.zeros_like(p) for p in self.params]
        self.steps = 0

    @property
    def input_dim(self) -> int:
        return int(np.prod(self.input_shape))

    def features(self, states: Sequence[State], inst: Instance) -> np.ndarray:
        try:
            X = np.stack([inst.encode(s, self.input_shape) for s in states])
        except DomainError as exc:
            raise EstimatorError(str(exc)) from exc
        if X.shape[1] != self.input_dim:
            raise EstimatorError(f"encoding size {X.shape[1]} != network input {self.input_dim}")
        return X

    def forward(self, X: np.ndarray, params=None):
        params = self.params if params is None else params
        acts = [X]
        pre = []
        a = X
        n_layers = len(params) // 2
        for i in range(n_layers):
            z = a @ params[2 * i] + params[2 * i + 1]
            pre.append(z)
            a = np.maximum(z, 0.0) if i < n_layers - 1 else z
            acts.append(a)
        y = _softplus(pre[-1][:, 0])
        return y, (acts, pre)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.forward(X)[0]

    def evaluate_batch(self, states: Sequence[State], inst: Instance) -> np.ndarray:
        return self.predict(self.features(states, inst))

    def evaluate(self, state: State, inst: Instance) -> float:
        return float(self.evaluate_batch([state], inst)[0])

    def loss_and_grads(self, X: np.ndarray, t: np.ndarray, params=None):
        params = self.params if params is None else params
        y, (acts, pre) = self.forward(X, params)
        B = len(t)
        loss = float(np.mean((y - t) ** 2))
        dz = (2.0 / B) * (y - t) * _sigmoid(pre[-1][:, 0])
        dz = dz[:, None]
        grads = [None] * len(params)
        for i in reversed(range(len(params) // 2)):
            grads[2 * i] = acts[i].T @ dz
            grads[2 * i + 1] = dz.sum(axis=0)
            if i > 0:
                dz = (dz @ params[2 * i].T) * (pre[i - 1] > 0)
        return loss, grads

    def loss(self, batch: Sequence[TrainingSample]) -> float:
        t = _check_targets(batch)
        X = self._batch_features(batch)
        return float(np.mean((self.predict(X) - t) ** 2))

    def _batch_features(self, batch):
        return np.stack([s.inst.encode(s.state, self.input_shape) for s in batch])

    def fit_batch(self, batch: Sequence[TrainingSample]) -> TrainReport:
        t = _check_targets(batch)
        X = self._batch_features(batch)
        before, grads = self.loss_and_grads(X, t)
        self._step(grads)
        after = float(np.mean((self.predict(X) - t) ** 2))
        return TrainReport(len(batch), before, after, *_count_sources(batch))

    def _step(self, grads):
        self.steps += 1
        if self.optimizer == "sgd":
            for p, g, v in zip(self.params, grads, self._slots):
                if self.momentum:
                    v *= self.momentum
                    v += g
                    g = v
                p -= self.lr * g
            return
        b1, b2, eps = 0.9, 0.999, 1e-8
        c1 = 1.0 - b1**self.steps
        c2 = 1.0 - b2**self.steps
        for p, g, m, v in zip(self.params, grads, self._slots, self._slots2):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + eps)

    def parameter_digest(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        for p in self.params:
            h.update(np.ascontiguousarray(p).tobytes())
        return h.hexdigest()

    def config(self) -> dict:
        return {
            "backend": self.backend,
            "input_shape": list(self.input_shape),
            "hidden": list(self.hidden),
            "lr": self.lr,
            "seed": self.seed,
            "optimizer": self.optimizer,
            "momentum": self.momentum,
        }

    def copy(self) -> "MlpEstimator":
        other = MlpEstimator(self.input_shape, self.hidden, self.lr, self.seed, self.optimizer, self.momentum)
        other.params = [p.copy() for p in self.params]
        other._slots = [p.copy() for p in self._slots]
        other._slots2 = [p.copy() for p in self._slots2]
        other.steps = self.steps
        return other


def make_estimator(backend: str, input_shape=None, **kwargs):
    if backend == "tabular":
        keep = {k: kwargs[k] for k in ("init_range", "lr", "seed") if k in kwargs}
        return TabularEstimator(**keep)
    if backend == "net":
        keep = {k: kwargs[k] for k in ("hidden", "lr", "seed", "optimizer", "momentum") if k in kwargs}
        return MlpEstimator(input_shape, **keep)
    raise EstimatorError(f"unknown backend {backend!r}")


# ---------------------------------------------------------------- gradient check


def gradient_check(
    est: MlpEstimator | TabularEstimator | None = None,
    n_samples: int = 8,
    seed: int = 0,
    step: float = 1e-4,
    input_dim: int = 12,
    hidden: Sequence[int] = (16, 16),
    details: bool = False,
):
    """Max elementwise relative error between backprop and central differences.

    Relative error is ``|a - n| / max(|a|, |n|, 1e-6)``. A perturbation that
    flips a ReLU makes the central difference meaningless; those elements
    are skipped and counted (``details=True`` returns ``(err, skipped)``).
    Tabular estimators have no gradient and give 0.
    """
    if isinstance(est, TabularEstimator):
        return (0.0, 0) if details else 0.0
    rng = np.random.default_rng(seed)
    if est is None:
        est = MlpEstimator((input_dim,), hidden, seed=int(rng.integers(2**31)))
    params = [p.copy() for p in est.params]
    X = rng.normal(size=(n_samples, est.input_dim))
    t = rng.uniform(0.0, 10.0, size=n_samples)
    _, grads = est.loss_and_grads(X, t, params)
    base = _relu_pattern(est, X, params)
    worst, skipped = 0.0, 0
    for k, p in enumerate(params):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + step
            lp, _ = est.loss_and_grads(X, t, params)
            kink = _relu_pattern(est, X, params) != base
            p[idx] = old - step
            lm, _ = est.loss_and_grads(X, t, params)
            kink = kink or _relu_pattern(est, X, params) != base
            p[idx] = old
            if kink:
                skipped += 1
                continue
            num = (lp - lm) / (2 * step)
            ana = grads[k][idx]
            worst = max(worst, abs(ana - num) / max(abs(ana), abs(num), 1e-6))
    worst = float(worst)
    return (worst, skipped) if details else worst


def _relu_pattern(est, X, params) -> bytes:
    _, (_, pre) = est.forward(X, params)
    return b"".join(np.packbits(z > 0).tobytes() for z in pre[:-1])


# ---------------------------------------------------------------- replay buffers


class _Ring:
    def __init__(self, capacity: int):
        self.capacity = int(capacity)
        self.items: list = []
        self.head = 0

    def __len__(self):
        return len(self.items)

    def extend(self, xs):
        for x in xs:
            if len(self.items) < self.capacity:
                self.items.append(x)
            else:
                self.items[self.head] = x
                self.head = (self.head + 1) % self.capacity

    def ordered(self) -> list:
        return self.items[self.head :] + self.items[: self.head]


@dataclass
class ReplayBuffer:
    """Plan-sourced and GVI-sourced samples in two bounded oldest-first queues."""

    capacity: int = 200_000
    plan: _Ring = field(init=False)
    gvi: _Ring = field(init=False)
    inserted: dict = field(default_factory=lambda: {PLAN: 0, GVI: 0})

    def __post_init__(self):
        self.plan = _Ring(self.capacity)
        self.gvi = _Ring(self.capacity)

    def add(self, samples: Sequence[TrainingSample]) -> None:
        plan = [s for s in samples if s.source == PLAN]
        gvi = [s for s in samples if s.source != PLAN]
        self.plan.extend(plan)
        self.gvi.extend(gvi)
        self.inserted[PLAN] += len(plan)
        self.inserted[GVI] += len(gvi)


def _draw(ring: _Ring, k: int, rng: np.random.Generator) -> list:
    if k <= 0 or not ring.items:
        return []
    n = len(ring.items)
    idx = rng.choice(n, size=min(k, n), replace=False)
    # oldest first, so order-sensitive learners apply the freshest labels last
    idx = sorted(idx, key=lambda i: (i - ring.head) % n)
    return [ring.items[i] for i in idx]


def sample_mixed_batch(buffers: ReplayBuffer, batch_size: int, p: float, rng: np.random.Generator):
    """``round(p * batch_size)`` GVI samples, the rest plan samples.

    Draws are uniform without replacement within a buffer. For 0 < p < 1 a
    short buffer is backfilled from the other one; p = 0 and p = 1 stay
    single-source, so a pure run never trains on the excluded source.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    n_gvi = int(math.floor(p * batch_size + 0.5))
    n_plan = batch_size - n_gvi
    gvi = _draw(buffers.gvi, n_gvi, rng)
    plan = _draw(buffers.plan, n_plan, rng)
    short = batch_size - len(gvi) - len(plan)
    if p in (0.0, 1.0):
        return gvi + plan
    if short > 0 and len(gvi) < n_gvi:
        plan = _draw(buffers.plan, min(n_plan + short, len(buffers.plan)), rng)
    elif short > 0 and len(plan) < n_plan:
        gvi = _draw(buffers.gvi, min(n_gvi + short, len(buffers.gvi)), rng)
    return gvi + plan


# ---------------------------------------------------------------- checkpoints


def _tupled(x):
    if isinstance(x, list):
        return tuple(_tupled(v) for v in x)
    return x


def save_checkpoint(est, path: str | Path, rng_state: dict | None = None) -> None:
    """Write parameters, config and optional rng state to one ``.npz`` file."""
    meta = {"version": CHECKPOINT_VERSION, "config": est.config(), "rng_state": rng_state}
    arrays = {}
    if isinstance(est, TabularEstimator):
        meta["table"] = [[k, v] for k, v in est.table.items()]
    else:
        meta["steps"] = est.steps
        for i, p in enumerate(est.params):
            arrays[f"p{i}"] = p
            arrays[f"m{i}"] = est._slots[i]
            arrays[f"v{i}"] = est._slots2[i]
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path: str | Path):
    """Returns ``(estimator, rng_state)``."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise EstimatorError(f"unsupported checkpoint version {meta.get('version')}")
        cfg = dict(meta["config"])
        backend = cfg.pop("backend")
        if backend == "tabular":
            est = TabularEstimator(**cfg)
            est.table = {_tupled(k): float(v) for k, v in meta["table"]}
        else:
            shape = cfg.pop("input_shape")
            est = MlpEstimator(shape, **cfg)
            est.params = [data[f"p{i}"].copy() for i in range(len(est.params))]
            est._slots = [data[f"m{i}"].copy() for i in range(len(est.params))]
            est._slots2 = [data[f"v{i}"].copy() for i in range(len(est.params))]
            est.steps = meta["steps"]
    return est, meta.get("rng_state")
