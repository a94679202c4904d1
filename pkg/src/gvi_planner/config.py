"""Run configuration and per-experiment recipes."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

DEFAULT_BUDGET = {"sokoban": 20000, "npuzzle": 500, "grid": 300}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    domain: str = "sokoban"
    engine: str = "bfs"
    backend: str = "net"
    budget: int = 0  # 0 picks the domain default
    weight: float = 2.0
    runs: int = 1
    sims_per_move: int = 100
    move_cap: int = 0  # 0 means max(500, 2 * best plan length)
    restart_noise: float = 0.1
    p: float = 0.6
    instance_batch: int = 32
    train_steps: int = 64
    train_batch: int = 256
    lr: float = 0.0  # 0 picks the backend default
    optimizer: str = "sgd"
    momentum: float = 0.0
    hidden: list = field(default_factory=lambda: [128, 128])
    init_range: float = 50.0
    buffer_capacity: int = 200_000
    dead_end_hint: float = 0.0
    freeze_open_labels: bool = False
    stall_window: int = 10
    max_iterations: int = 1000
    seed: int = 0
    workers: int = 1
    checkpoint_every: int = 10
    out_dir: str = "runs/latest"
    # grid demo
    grid_size: int = 50
    grid_iterations: int = 200
    grid_post_solve: int = 10
    # quality harness
    k_max: int = 30
    boards_per_k: int = 50
    thresholds: list = field(default_factory=lambda: [0, 5, 10])
    # ablation
    p_list: list = field(default_factory=lambda: [0.0, 0.6, 1.0])

    def __post_init__(self):
        self.validate()

    @property
    def search_budget(self) -> int:
        return self.budget or DEFAULT_BUDGET.get(self.domain, 500)

    @property
    def learning_rate(self) -> float:
        if self.lr:
            return self.lr
        return 1.0 if self.backend == "tabular" else 1e-3

    def validate(self) -> None:
        checks = [
            (self.domain in ("grid", "npuzzle", "sokoban"), "domain must be grid, npuzzle or sokoban"),
            (self.engine in ("bfs", "mcts"), "engine must be bfs or mcts"),
            (self.backend in ("tabular", "net"), "backend must be tabular or net"),
            (self.budget >= 0, "budget must be >= 0"),
            (self.weight >= 0, "weight must be >= 0"),
            (self.runs >= 1, "runs must be >= 1"),
            (self.sims_per_move >= 1, "sims_per_move must be >= 1"),
            (self.move_cap >= 0, "move_cap must be >= 0"),
            (0.0 <= self.p <= 1.0, "p must lie in [0, 1]"),
            (self.instance_batch >= 1, "instance_batch must be >= 1"),
            (self.train_steps >= 0, "train_steps must be >= 0"),
            (self.train_batch >= 1, "train_batch must be >= 1"),
            (self.lr >= 0, "lr must be >= 0"),
            (self.optimizer in ("sgd", "adam"), "optimizer must be sgd or adam"),
            (self.init_range > 0, "init_range must be > 0"),
            (self.buffer_capacity >= 1, "buffer_capacity must be >= 1"),
            (self.stall_window >= 1, "stall_window must be >= 1"),
            (self.max_iterations >= 1, "max_iterations must be >= 1"),
            (self.workers >= 1, "workers must be >= 1"),
            (all(0.0 <= p <= 1.0 for p in self.p_list), "p_list entries must lie in [0, 1]"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        text = Path(path).read_text()
        if str(path).endswith((".yaml", ".yml")):
            import yaml

            return cls.from_dict(yaml.safe_load(text) or {})
        return cls.from_dict(json.loads(text))

    def override(self, **kwargs) -> "RunConfig":
        return replace(copy.deepcopy(self), **{k: v for k, v in kwargs.items() if v is not None})


RECIPES: dict[str, RunConfig] = {
    "sokoban": RunConfig(domain="sokoban", engine="bfs", backend="net"),
    "grid-demo": RunConfig(
        domain="grid",
        backend="tabular",
        budget=300,
        p=0.6,
        instance_batch=1,
        train_steps=1,
        train_batch=1024,
        buffer_capacity=1024,
    ),
    "quality": RunConfig(domain="npuzzle", backend="net", budget=500, p=0.6, instance_batch=64),
    "ablate": RunConfig(domain="npuzzle", backend="net", budget=500, instance_batch=64),
}


def recipe(name: str) -> RunConfig:
    if name not in RECIPES:
        raise ConfigError(f"unknown recipe {name!r}")
    return copy.deepcopy(RECIPES[name])
