"""Training reports: per-iteration metrics plus wall-clock totals."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path


@dataclass
class IterationStats:
    """One training iteration: dictionary size, error, and split timings."""

    iteration: int
    dictionary_size: int  # number of blocks (union) or atoms (dense)
    rmse: float
    elapsed_learn: float
    elapsed_represent: float


@dataclass
class TrainReport:
    algo: str
    config: dict
    seed: int
    workers: int
    rows: list[IterationStats] = field(default_factory=list)
    t_init: float = 0.0
    t_learn: float = 0.0
    t_rep: float = 0.0
    rmse_final: float = float("nan")
    rmse_recomputed: float = float("nan")
    notes: list[str] = field(default_factory=list)

    def finalize_totals(self) -> None:
        self.t_learn = sum(r.elapsed_learn + r.elapsed_represent for r in self.rows)

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainReport":
        rows = [IterationStats(**r) for r in d.get("rows", [])]
        return cls(
            algo=d["algo"],
            config=d["config"],
            seed=d["seed"],
            workers=d["workers"],
            rows=rows,
            t_init=d.get("t_init", 0.0),
            t_learn=d.get("t_learn", 0.0),
            t_rep=d.get("t_rep", 0.0),
            rmse_final=d.get("rmse_final", float("nan")),
            rmse_recomputed=d.get("rmse_recomputed", float("nan")),
            notes=list(d.get("notes", [])),
        )

    @classmethod
    def load(cls, path) -> "TrainReport":
        return cls.from_dict(json.loads(Path(path).read_text()))
