"""Kernel integral operators ``(Tf)(k) = sum_x A(k, x) f(x) w(x)``.

Kernels are evaluated lazily in row blocks of fixed size, so results do not
depend on how blocks are scheduled across threads.  A dense matrix cache can
be switched on per kernel; it changes speed only.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .measure import MeasureSpace, ScalarField

__all__ = [
    "Kernel",
    "TargetGrid",
    "Region",
    "SpaceMismatchError",
    "ROW_BLOCK",
    "row_blocks",
    "map_blocks",
    "apply",
    "apply_on_region",
]

# Y is a finite sample grid with quadrature weights: same structure as X.
TargetGrid = MeasureSpace

ROW_BLOCK = 256


class SpaceMismatchError(ValueError):
    """A field, region or kernel refers to a different space than expected."""


class Kernel:
    """``A(k, x)`` evaluated on grid coordinates and atom coordinates.

    ``func(k, x)`` must broadcast over numpy arrays, be pure, and be safe to
    call from several threads at once.
    """

    def __init__(
        self,
        name: str,
        func: Callable[[np.ndarray, np.ndarray], np.ndarray],
        params: dict | None = None,
        bound: float | None = None,
        cache: bool = False,
    ):
        self.name = name
        self.func = func
        self.params = dict(params or {})
        self.bound = bound
        self.cache = cache
        self._cached: dict = {}
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"Kernel({self.name}{', ' if args else ''}{args})"

    @property
    def descriptor(self) -> dict:
        return {"name": self.name, **self.params}

    def evaluate(self, k, x) -> np.ndarray:
        return np.asarray(self.func(np.asarray(k, dtype=float), np.asarray(x, dtype=float)), dtype=complex)

    def _compute(self, grid: MeasureSpace, space: MeasureSpace, rows: slice, cols=None) -> np.ndarray:
        x = space.points if cols is None else space.points[cols]
        k = grid.points[rows]
        return np.broadcast_to(self.evaluate(k[:, None], x[None, :]), (k.size, x.size))

    def matrix(self, grid: MeasureSpace, space: MeasureSpace) -> np.ndarray:
        """Dense ``len(grid) x len(space)`` kernel matrix (cached if enabled)."""
        key = (id(grid), id(space))
        with self._lock:
            hit = self._cached.get(key)
        if hit is not None:
            return hit[2]
        m = np.ascontiguousarray(self._compute(grid, space, slice(None)))
        m.setflags(write=False)
        if self.cache:
            with self._lock:
                if len(self._cached) >= 4:
                    self._cached.pop(next(iter(self._cached)))
                self._cached[key] = (grid, space, m)
        return m

    def block(self, grid: MeasureSpace, space: MeasureSpace, rows: slice, cols=None) -> np.ndarray:
        """Rows ``rows`` of the kernel matrix, optionally restricted to ``cols``."""
        if self.cache:
            m = self.matrix(grid, space)[rows]
            # contiguous layout keeps the BLAS path, and so the rounding, unchanged
            return m if cols is None else np.ascontiguousarray(m[:, cols])
        return np.ascontiguousarray(self._compute(grid, space, rows, cols))


def row_blocks(n: int, size: int = ROW_BLOCK) -> list[slice]:
    return [slice(i, min(i + size, n)) for i in range(0, n, size)]


def map_blocks(fn, n: int, threads: int = 1) -> list:
    """``fn(rows)`` over fixed row blocks, in block order."""
    blocks = row_blocks(n)
    if threads <= 1 or len(blocks) == 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, blocks))


@dataclass(frozen=True, eq=False)
class Region:
    """A union of atom fragments ``atom x [lo, hi]``, ``0 <= lo <= hi <= 1``.

    Whole atoms have ``lo = 0, hi = 1``.  A fragment contributes
    ``(hi - lo) * weight`` to measures and integrals.
    """

    indices: np.ndarray
    lo: np.ndarray = None
    hi: np.ndarray = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        lo = np.zeros(idx.size) if self.lo is None else np.asarray(self.lo, dtype=float).ravel()
        hi = np.ones(idx.size) if self.hi is None else np.asarray(self.hi, dtype=float).ravel()
        if not (lo.size == hi.size == idx.size):
            raise ValueError("indices, lo and hi must have equal length")
        if np.any(lo < 0) or np.any(hi > 1) or np.any(hi < lo):
            raise ValueError("fragment fraction outside [0, 1]")
        for name, a in (("indices", idx), ("lo", lo), ("hi", hi)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def atoms(cls, atoms) -> "Region":
        a = np.asarray(atoms)
        if a.dtype == bool:
            a = np.flatnonzero(a)
        return cls(a)

    @classmethod
    def from_fractions(cls, indices, fractions) -> "Region":
        fr = np.asarray(fractions, dtype=float)
        return cls(indices, np.zeros(fr.size), fr)

    @classmethod
    def empty(cls) -> "Region":
        return cls(np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return self.indices.size

    @property
    def fractions(self) -> np.ndarray:
        return self.hi - self.lo

    def effective_weights(self, space: MeasureSpace) -> np.ndarray:
        """Per-atom weight carried by the region."""
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= len(space)):
            raise SpaceMismatchError("region refers to atoms outside the space")
        frac = np.bincount(self.indices, weights=self.fractions, minlength=len(space))
        if np.any(frac > 1 + 1e-12):
            raise ValueError("region covers an atom more than once")
        return frac * space.weights

    def measure(self, space: MeasureSpace) -> float:
        return float(np.sum(self.fractions * space.weights[self.indices]))

    def union(self, other: "Region") -> "Region":
        return Region(
            np.concatenate((self.indices, other.indices)),
            np.concatenate((self.lo, other.lo)),
            np.concatenate((self.hi, other.hi)),
        )


def _weighted_apply(kernel: Kernel, space: MeasureSpace, fw: np.ndarray, grid: MeasureSpace, threads: int) -> np.ndarray:
    cols = np.flatnonzero(fw)
    if cols.size == 0:
        return np.zeros(len(grid), dtype=complex)
    v = fw[cols]
    parts = map_blocks(lambda rows: kernel.block(grid, space, rows, cols) @ v, len(grid), threads)
    return np.concatenate(parts)


def apply(kernel: Kernel, f: ScalarField, grid: MeasureSpace, threads: int = 1) -> ScalarField:
    """``(Tf)(k)`` at every grid point."""
    fw = f.values * f.space.weights
    return ScalarField(grid, _weighted_apply(kernel, f.space, fw, grid, threads))


def apply_on_region(
    kernel: Kernel,
    f: ScalarField,
    region,
    grid: MeasureSpace,
    threads: int = 1,
) -> ScalarField:
    """``sum over region of A(k, x) f(x) (fraction * w(x))``."""
    if not isinstance(region, Region):
        region = Region.atoms(region)
    fw = f.values * region.effective_weights(f.space)
    return ScalarField(grid, _weighted_apply(kernel, f.space, fw, grid, threads))
