"""Finite atomic measure spaces, fields on them, and decreasing rearrangements.

A :class:`MeasureSpace` is an ordered list of atoms with positive weights and
(optionally) a coordinate per atom.  Continuum spaces are represented by
quadrature grids: one atom per cell, weight equal to the cell measure.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO, Union

import numpy as np

__all__ = [
    "MeasureSpace",
    "ScalarField",
    "RearrangementProfile",
    "distribution_function",
    "rearrange",
    "support",
    "indicator",
    "write_field",
    "read_field",
]

PathOrStream = Union[str, os.PathLike, TextIO]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MeasureSpace:
    """Ordered atoms with positive weights.

    ``points`` holds the coordinate of each atom (grid node, integer index,
    ...); kernels are evaluated on these.  It defaults to ``0, 1, 2, ...``.
    """

    ids: tuple
    weights: np.ndarray
    points: np.ndarray = None

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        w = np.array(self.weights, dtype=float).ravel()
        if len(ids) != w.size:
            raise ValueError(f"{len(ids)} atom ids but {w.size} weights")
        if len(set(ids)) != len(ids):
            raise ValueError("atom ids must be unique")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("atom weights must be finite and positive")
        if self.points is None:
            pts = np.arange(w.size, dtype=float)
        else:
            pts = np.array(self.points, dtype=float).ravel()
            if pts.size != w.size:
                raise ValueError("one point per atom required")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "points", _frozen(pts))

    @classmethod
    def from_weights(cls, weights: Sequence[float], points=None) -> "MeasureSpace":
        weights = np.asarray(weights, dtype=float)
        return cls(tuple(str(i) for i in range(weights.size)), weights, points)

    @classmethod
    def uniform_grid(cls, a: float, b: float, n: int, prefix: str = "") -> "MeasureSpace":
        """Midpoint grid of ``n`` equal cells on ``[a, b]``."""
        if not (b > a) or n < 1:
            raise ValueError(f"invalid grid [{a}, {b}] with {n} cells")
        h = (b - a) / n
        pts = a + (np.arange(n) + 0.5) * h
        return cls(tuple(f"{prefix}{i}" for i in range(n)), np.full(n, h), pts)

    def __len__(self) -> int:
        return self.weights.size

    @property
    def total(self) -> float:
        return float(np.sum(self.weights))

    def measure(self, atoms) -> float:
        """Measure of a subset given as an index array or boolean mask."""
        return float(np.sum(self.weights[np.asarray(atoms)]))

    def same_as(self, other: "MeasureSpace") -> bool:
        if self is other:
            return True
        return (
            self.ids == other.ids
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.points, other.points)
        )


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A complex value on every atom of ``space``."""

    space: MeasureSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=complex).ravel()
        if v.size != len(self.space):
            raise ValueError(f"field has {v.size} values for {len(self.space)} atoms")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def scaled(self, c: complex) -> "ScalarField":
        return ScalarField(self.space, c * self.values)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        if not self.space.same_as(other.space):
            raise ValueError("fields live on different spaces")
        return ScalarField(self.space, self.values + other.values)

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.space, -self.values)

    def integral(self) -> complex:
        return complex(np.sum(self.values * self.space.weights))


def indicator(space: MeasureSpace, atoms, c: complex = 1.0) -> ScalarField:
    """``c`` times the characteristic function of the given atoms."""
    v = np.zeros(len(space), dtype=complex)
    v[np.asarray(atoms)] = c
    return ScalarField(space, v)


@dataclass(frozen=True, eq=False)
class RearrangementProfile:
    """Right-continuous nonincreasing step function on ``[0, inf)``.

    ``t[j]`` is where the plateau with height ``values[j]`` starts; the last
    breakpoint always carries value 0 and marks the support measure.
    """

    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        v = np.array(self.values, dtype=float)
        if t.size != v.size or t.size == 0:
            raise ValueError("need matching, nonempty breakpoint arrays")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("breakpoints must start at 0 and increase strictly")
        if np.any(np.diff(v) > 0) or v[-1] != 0.0 or np.any(v < 0):
            raise ValueError("values must be nonnegative, nonincreasing, ending in 0")
        object.__setattr__(self, "t", _frozen(t))
        object.__setattr__(self, "values", _frozen(v))

    @property
    def support_measure(self) -> float:
        return float(self.t[-1])

    @property
    def starts(self) -> np.ndarray:
        return self.t[:-1]

    @property
    def ends(self) -> np.ndarray:
        return self.t[1:]

    @property
    def heights(self) -> np.ndarray:
        return self.values[:-1]

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.t, s, side="right") - 1
        return np.where(s < 0, np.inf, self.values[np.clip(idx, 0, None)])

    def integral(self) -> float:
        return float(np.sum(self.heights * np.diff(self.t)))

    def level_measure(self, s: float) -> float:
        """Lebesgue measure of ``{t : f*(t) > s}``."""
        above = self.heights > s
        return float(np.sum(np.diff(self.t)[above]))

    def breakpoints(self) -> list[tuple[float, float]]:
        return list(zip(self.t.tolist(), self.values.tolist()))


def distribution_function(f: ScalarField, s: float) -> float:
    """``mu{x : |f(x)| > s}``."""
    if s < 0:
        raise ValueError("level must be nonnegative")
    return float(np.sum(f.space.weights[f.abs > s]))


def support(f: ScalarField, threshold: float = 0.0) -> np.ndarray:
    """Indices of atoms with ``|f| > threshold``, in atom order."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    return np.flatnonzero(f.abs > threshold)


def rearrange(f: ScalarField) -> RearrangementProfile:
    """Decreasing rearrangement of ``|f|``; ties keep atom order."""
    a = f.abs
    idx = np.flatnonzero(a > 0)
    order = idx[np.argsort(-a[idx], kind="stable")]
    heights = a[order]
    t = np.concatenate(([0.0], np.cumsum(f.space.weights[order])))
    return RearrangementProfile(t, np.concatenate((heights, [0.0])))


# -- text serialization: "atom_id weight value_re value_im" per line ---------

def _open(target: PathOrStream, mode: str):
    if isinstance(target, (str, os.PathLike)):
        return open(target, mode, encoding="utf-8"), True
    return target, False


def write_field(f: ScalarField, target: PathOrStream) -> None:
    """Write ``f`` one atom per line; floats use shortest round-trip repr."""
    fh, owned = _open(target, "w")
    try:
        for aid, w, v in zip(f.space.ids, f.space.weights.tolist(), f.values.tolist()):
            if any(c.isspace() for c in aid) or not aid:
                raise ValueError(f"atom id {aid!r} cannot be serialized")
            fh.write(f"{aid} {w!r} {v.real!r} {v.imag!r}\n")
    finally:
        if owned:
            fh.close()


def read_field(source: PathOrStream, points: Iterable[float] | None = None) -> ScalarField:
    """Inverse of :func:`write_field`; blank lines and ``#`` comments skipped."""
    fh, owned = _open(source, "r")
    try:
        text = fh.read()
    finally:
        if owned:
            fh.close()
    ids, w, vals = [], [], []
    for lineno, line in enumerate(io.StringIO(text), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 4 columns, got {len(parts)}")
        ids.append(parts[0])
        w.append(float(parts[1]))
        vals.append(complex(float(parts[2]), float(parts[3])))
    space = MeasureSpace(tuple(ids), np.array(w), None if points is None else np.asarray(points))
    return ScalarField(space, np.array(vals, dtype=complex))
