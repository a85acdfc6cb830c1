"""Named-segment parameter sets.

A ParamSet is the unit of exchange in federated training: an ordered list of
(name, flat tensor) segments. Two sets are conformable iff segment names and
shapes match pairwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor


@dataclass
class ParamSet:
    segments: tuple[tuple[str, Tensor], ...]

    def __post_init__(self):
        names = [n for n, _ in self.segments]
        if len(set(names)) != len(names):
            raise ShapeError(f"duplicate segment names: {names}")

    @classmethod
    def from_arrays(cls, pairs) -> "ParamSet":
        """Wrap arrays as leaf tensors (float32 unless already a float dtype)."""
        return cls(tuple((n, Tensor(a)) for n, a in pairs))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.segments)

    @property
    def total_count(self) -> int:
        return int(sum(t.size for _, t in self.segments))

    def __getitem__(self, name: str) -> Tensor:
        for n, t in self.segments:
            if n == name:
                return t
        raise KeyError(name)

    def data(self, name: str) -> np.ndarray:
        return self[name].data

    def conformable(self, other: "ParamSet") -> bool:
        return (
            self.names == other.names
            and all(a.shape == b.shape for (_, a), (_, b) in zip(self.segments, other.segments))
        )

    def require_conformable(self, other: "ParamSet", what: str = "ParamSet") -> None:
        if not self.conformable(other):
            raise ShapeError(
                f"non-conformable {what}: {[(n, t.shape) for n, t in self.segments]} vs "
                f"{[(n, t.shape) for n, t in other.segments]}"
            )

    def copy(self) -> "ParamSet":
        return ParamSet(tuple((n, Tensor(t.data.copy())) for n, t in self.segments))

    def leaves(self) -> "ParamSet":
        """Fresh graph-leaf tensors sharing this set's arrays (read-only use)."""
        return ParamSet(tuple((n, Tensor(t.data, requires_grad=True)) for n, t in self.segments))

    def zeros_like(self) -> "ParamSet":
        return ParamSet(tuple((n, Tensor(np.zeros_like(t.data))) for n, t in self.segments))

    def map(self, fn) -> "ParamSet":
        """Apply an array function segment-wise, keeping names."""
        return ParamSet(tuple((n, Tensor(fn(t.data))) for n, t in self.segments))

    def map2(self, other: "ParamSet", fn) -> "ParamSet":
        self.require_conformable(other)
        return ParamSet(
            tuple(
                (n, Tensor(np.asarray(fn(a.data, b.data), dtype=a.data.dtype)))
                for (n, a), (_, b) in zip(self.segments, other.segments)
            )
        )

    def max_abs_diff(self, other: "ParamSet") -> float:
        self.require_conformable(other)
        return max(
            (float(np.max(np.abs(a.data - b.data))) if a.size else 0.0)
            for (_, a), (_, b) in zip(self.segments, other.segments)
        )


def weighted_mean(sets: list[ParamSet], weights: list[float]) -> ParamSet:
    """Weighted elementwise mean of conformable ParamSets, in the given order."""
    if not sets:
        raise ShapeError("weighted_mean of zero ParamSets")
    for s in sets[1:]:
        sets[0].require_conformable(s)
    wsum = float(sum(weights))
    out = []
    for i, (name, t) in enumerate(sets[0].segments):
        acc = np.zeros_like(t.data)
        for s, w in zip(sets, weights):
            acc += np.float32(w / wsum) * s.segments[i][1].data
        out.append((name, Tensor(acc)))
    return ParamSet(tuple(out))
