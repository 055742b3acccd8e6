"""Set similarities and the losses ``L(P, S) = SIM(P, P) - SIM(P, S)``."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ValidationError
from .graph import HOP_DIRECTIONS, Graph, jhop_table, node_set


@dataclass(frozen=True)
class LossSpec:
    kind: str = "jhop"  # "jhop" or "hamming"
    j: int = 1
    alpha: float = 1000.0
    direction: str = "out"

    def __post_init__(self):
        if self.kind not in ("jhop", "hamming"):
            raise ValidationError(f"unknown loss kind {self.kind!r}")
        if not self.alpha > 0:
            raise ValidationError("alpha must be > 0")
        if self.j < 0:
            raise ValidationError("j must be >= 0")
        if self.direction not in HOP_DIRECTIONS:
            raise ValidationError(f"direction must be one of {HOP_DIRECTIONS}")

    @classmethod
    def parse(cls, text: str, alpha: float = 1000.0) -> "LossSpec":
        """``"hamming"``, ``"jhop"`` or ``"jhop:<j>"``."""
        if text == "hamming":
            return cls("hamming", 0, alpha)
        kind, _, j = text.partition(":")
        if kind != "jhop":
            raise ValidationError(f"bad loss {text!r}")
        return cls("jhop", int(j) if j else 1, alpha)

    @classmethod
    def from_json(cls, obj: dict) -> "LossSpec":
        kind = obj.get("loss", "jhop")
        return cls(kind, int(obj.get("j", 1)) if kind == "jhop" else 0, float(obj.get("alpha", 1000.0)),
                   obj.get("direction", "out"))

    def to_json(self) -> dict:
        out = {"loss": self.kind, "alpha": self.alpha}
        if self.kind == "jhop":
            out.update(j=self.j, direction=self.direction)
        return out


@lru_cache(maxsize=32)
def _table(G: Graph, j: int, direction: str) -> np.ndarray:
    return jhop_table(G, j, direction)


def hop_table(spec: LossSpec, G: Graph) -> np.ndarray:
    return _table(G, spec.j, spec.direction)


def hood_mask(spec: LossSpec, G: Graph, A) -> np.ndarray:
    A = list(node_set(A))
    if not A:
        return np.zeros(G.n, dtype=bool)
    return hop_table(spec, G)[A].any(axis=0)


def similarity(spec: LossSpec, G: Graph, A, B) -> float:
    if spec.kind == "hamming":
        return 1.0 if node_set(A) == node_set(B) else 0.0
    return float(np.count_nonzero(hood_mask(spec, G, A) & hood_mask(spec, G, B)))


def loss(spec: LossSpec, G: Graph, P, S) -> float:
    return similarity(spec, G, P, P) - similarity(spec, G, P, S)
