"""Extending families of atom sets and their continuous-measure lifting.

On an atomic space every stage of a family is a jump of ``t -> mu(Omega_t)``.
Lifting replaces each atom ``x`` by ``x * [0, 1]`` with product measure and
fills the atoms of a stage simultaneously, so that the lifted family
``Omega~_u`` has measure exactly ``u`` for every ``u``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .measure import MeasureSpace, ScalarField
from .operator import Kernel, Region, SpaceMismatchError

__all__ = [
    "ExtendingFamily",
    "MeasureProfile",
    "LiftedSpace",
    "LiftedFamily",
    "LiftedKernel",
    "measure_profile",
    "lift",
    "lift_field",
    "lift_kernel",
]


def _ro(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ExtendingFamily:
    """Nested atom sets: ``Omega_t`` is the union of stages with ``t_j <= t``."""

    space: MeasureSpace
    t: np.ndarray
    stages: tuple

    def __post_init__(self):
        t = np.array(self.t, dtype=float).ravel()
        stages = tuple(_ro(np.array(s, dtype=np.int64).ravel()) for s in self.stages)
        if t.size != len(stages):
            raise ValueError("one parameter value per stage required")
        if np.any(np.diff(t) <= 0):
            raise ValueError("stage parameters must increase strictly")
        flat = np.concatenate(stages) if stages else np.zeros(0, dtype=np.int64)
        if any(s.size == 0 for s in stages):
            raise ValueError("every stage must add at least one atom")
        if flat.size and (flat.min() < 0 or flat.max() >= len(self.space)):
            raise SpaceMismatchError("family refers to atoms outside the space")
        if np.unique(flat).size != flat.size:
            raise ValueError("stages must be pairwise disjoint")
        sizes = np.array([s.size for s in stages], dtype=np.int64)
        object.__setattr__(self, "t", _ro(t))
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "order", _ro(flat))
        object.__setattr__(self, "offsets", _ro(np.concatenate(([0], np.cumsum(sizes)))))

    @classmethod
    def from_stages(cls, space: MeasureSpace, stages: Sequence, t=None) -> "ExtendingFamily":
        if t is None:
            t = np.arange(len(stages), dtype=float)
        return cls(space, t, tuple(stages))

    @classmethod
    def prefix(cls, space: MeasureSpace, order=None, t=None) -> "ExtendingFamily":
        """One atom per stage, in ``order`` (default: atom order)."""
        order = np.arange(len(space)) if order is None else np.asarray(order, dtype=np.int64)
        return cls.from_stages(space, [[i] for i in order], t)

    @classmethod
    def symmetric(cls, space: MeasureSpace, center: float = 0.0, rtol: float = 1e-9) -> "ExtendingFamily":
        """``Omega_t = {x : |x - center| <= t}``; atoms at equal distance share a stage."""
        d = np.abs(space.points - center)
        order = np.argsort(d, kind="stable")
        ds = d[order]
        scale = max(float(ds[-1]), 1.0) if ds.size else 1.0
        breaks = np.flatnonzero(np.diff(ds) > rtol * scale) + 1
        groups = np.split(order, breaks)
        t = [float(d[g].max()) for g in groups]
        return cls(space, np.array(t), tuple(np.sort(g) for g in groups))

    @classmethod
    def suffix(cls, space: MeasureSpace) -> "ExtendingFamily":
        """``Omega_t = {x >= -t}``: tails ``[x, end]`` grow as ``x`` decreases."""
        order = np.argsort(-space.points, kind="stable")
        return cls.prefix(space, order, t=-space.points[order] + 0.0)

    def __len__(self) -> int:
        return len(self.stages)

    @property
    def stage_measures(self) -> np.ndarray:
        w = self.space.weights[self.order]
        return np.add.reduceat(w, self.offsets[:-1]) if len(self) else np.zeros(0)

    def stage_atoms(self, j: int) -> np.ndarray:
        return self.order[self.offsets[j]:self.offsets[j + 1]]

    def stage_index(self) -> np.ndarray:
        """Stage of every atom, ``-1`` for atoms never reached."""
        out = np.full(len(self.space), -1, dtype=np.int64)
        out[self.order] = np.repeat(np.arange(len(self)), np.diff(self.offsets))
        return out

    def prefix_region(self, j: int) -> Region:
        """Atoms of the first ``j`` stages."""
        return Region(self.order[: self.offsets[j]])

    def region_at(self, t: float) -> Region:
        return self.prefix_region(int(np.searchsorted(self.t, t, side="right")))

    def restrict(self, atoms) -> tuple["ExtendingFamily", np.ndarray]:
        """Intersect every stage with ``atoms``; empty stages are dropped.

        Returns the new family and the original index of each kept stage.
        """
        keep = np.zeros(len(self.space), dtype=bool)
        keep[np.asarray(atoms)] = True
        stages, kept = [], []
        for j, s in enumerate(self.stages):
            s = s[keep[s]]
            if s.size:
                stages.append(s)
                kept.append(j)
        kept = np.array(kept, dtype=np.int64)
        return ExtendingFamily(self.space, self.t[kept], tuple(stages)), kept


@dataclass(frozen=True, eq=False)
class MeasureProfile:
    """Right-continuous step function ``t -> mu(Omega_t)`` and its jumps."""

    t: np.ndarray
    jumps: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return np.cumsum(self.jumps)

    def __call__(self, t):
        cum = np.concatenate(([0.0], np.cumsum(self.jumps)))
        return cum[np.searchsorted(self.t, np.asarray(t, dtype=float), side="right")]


def measure_profile(family: ExtendingFamily, space: MeasureSpace | None = None) -> MeasureProfile:
    """Jump locations ``t_n`` and sizes ``y_n`` of ``mu(Omega_t)``."""
    if space is not None and not space.same_as(family.space):
        raise SpaceMismatchError("family is defined on another space")
    return MeasureProfile(family.t, family.stage_measures)


@dataclass(frozen=True, eq=False)
class LiftedSpace:
    """Atoms split into fragments ``parent x [lo, hi]`` partitioning ``[0, 1]``."""

    parent: MeasureSpace
    parent_index: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.parent_index, dtype=np.int64)
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        order = np.lexsort((lo, pi))
        pi, lo, hi = pi[order], lo[order], hi[order]
        first = np.concatenate(([True], pi[1:] != pi[:-1]))
        last = np.concatenate((pi[1:] != pi[:-1], [True]))
        if (
            not np.array_equal(np.unique(pi), np.arange(len(self.parent)))
            or np.any(lo[first] != 0.0)
            or np.any(hi[last] != 1.0)
            or np.any(hi[:-1][~last[:-1]] != lo[1:][~first[1:]])
            or np.any(hi <= lo)
        ):
            raise ValueError("fragments must partition [0, 1] for every parent atom")
        counter = np.arange(pi.size) - np.flatnonzero(first)[np.cumsum(first) - 1]
        ids = tuple(f"{self.parent.ids[p]}/{c}" for p, c in zip(pi.tolist(), counter.tolist()))
        space = MeasureSpace(ids, self.parent.weights[pi] * (hi - lo), self.parent.points[pi])
        object.__setattr__(self, "parent_index", _ro(pi))
        object.__setattr__(self, "lo", _ro(lo))
        object.__setattr__(self, "hi", _ro(hi))
        object.__setattr__(self, "space", space)

    @classmethod
    def trivial(cls, parent: MeasureSpace) -> "LiftedSpace":
        n = len(parent)
        return cls(parent, np.arange(n), np.zeros(n), np.ones(n))

    def __len__(self) -> int:
        return self.parent_index.size

    def locate(self, region: Region) -> Region:
        """Express a parent-space fragment region on the lifted space.

        Each parent fragment is cut along the lifted fragments; the result is
        a region over lifted atoms with fractions relative to each fragment.
        """
        idx, lo, hi = [], [], []
        starts = np.searchsorted(self.parent_index, region.indices, side="left")
        stops = np.searchsorted(self.parent_index, region.indices, side="right")
        for a, b, rlo, rhi in zip(starts, stops, region.lo, region.hi):
            for j in range(a, b):
                flo, fhi = self.lo[j], self.hi[j]
                x0, x1 = max(flo, rlo), min(fhi, rhi)
                if x1 > x0:
                    width = fhi - flo
                    idx.append(j)
                    lo.append(min(1.0, (x0 - flo) / width))
                    hi.append(min(1.0, (x1 - flo) / width))
        return Region(np.array(idx, dtype=np.int64), np.array(lo), np.array(hi))


@dataclass(frozen=True, eq=False)
class LiftedFamily:
    """``Omega~_u`` for ``0 <= u <= total``: full earlier stages plus the
    current stage's atoms filled to the common fraction
    ``(u - B_J) / mu(stage J)``.
    """

    family: ExtendingFamily
    origin: np.ndarray = None

    def __post_init__(self):
        m = self.family.stage_measures
        bounds = np.concatenate(([0.0], np.cumsum(m)))
        origin = np.arange(len(self.family)) if self.origin is None else np.asarray(self.origin)
        object.__setattr__(self, "stage_measures", _ro(m))
        object.__setattr__(self, "bounds", _ro(bounds))
        object.__setattr__(self, "origin", _ro(np.array(origin, dtype=np.int64)))

    @property
    def space(self) -> MeasureSpace:
        return self.family.space

    @property
    def total(self) -> float:
        return float(self.bounds[-1])

    def __len__(self) -> int:
        return len(self.family)

    def fill(self, u: float) -> tuple[int, float]:
        """Stage ``J`` being filled at measure ``u`` and its fill fraction."""
        if not (0.0 <= u <= self.total * (1 + 1e-12)):
            raise ValueError(f"u={u} outside [0, {self.total}]")
        J = int(np.searchsorted(self.bounds, u, side="right")) - 1
        if J >= len(self):
            return len(self), 0.0
        return J, min(1.0, (u - self.bounds[J]) / self.stage_measures[J])

    def _stage_part(self, J: int, lo: float, hi: float) -> Region:
        atoms = self.family.stage_atoms(J)
        return Region(atoms, np.full(atoms.size, lo), np.full(atoms.size, hi))

    def region(self, u: float) -> Region:
        J, s = self.fill(u)
        full = Region(self.family.order[: self.family.offsets[J]])
        if J < len(self) and s > 0:
            return full.union(self._stage_part(J, 0.0, s))
        return full

    def segment(self, u0: float, u1: float) -> Region:
        """Fragments of ``Omega~_{u1}`` not in ``Omega~_{u0}``."""
        if u1 < u0:
            raise ValueError("segment endpoints out of order")
        J0, s0 = self.fill(u0)
        J1, s1 = self.fill(u1)
        if J0 == J1:
            return self._stage_part(J0, s0, s1) if s1 > s0 else Region.empty()
        parts = []
        if s0 < 1.0:
            parts.append(self._stage_part(J0, s0, 1.0))
        off = self.family.offsets
        parts.append(Region(self.family.order[off[J0 + 1]: off[J1]]))
        if J1 < len(self) and s1 > 0:
            parts.append(self._stage_part(J1, 0.0, s1))
        out = parts[0]
        for p in parts[1:]:
            out = out.union(p)
        return out

    def measure(self, region: Region) -> float:
        return region.measure(self.space)

    def stage_cuts(self, cuts) -> list[np.ndarray]:
        """Fill fractions in ``(0, 1)`` at which each stage is cut by ``cuts``."""
        cuts = np.asarray(cuts, dtype=float).ravel()
        out = []
        for J in range(len(self)):
            inside = cuts[(cuts > self.bounds[J]) & (cuts < self.bounds[J + 1])]
            s = np.unique(np.minimum(1.0, (inside - self.bounds[J]) / self.stage_measures[J]))
            out.append(s[(s > 0) & (s < 1)])
        return out

    def lifted_space(self, cuts=()) -> LiftedSpace:
        """Fragments fine enough that ``Omega~_u`` for ``u`` in ``cuts`` are unions."""
        per_stage = self.stage_cuts(cuts)
        stage_of = self.family.stage_index()
        pi, lo, hi = [], [], []
        for a in range(len(self.space)):
            J = stage_of[a]
            c = per_stage[J] if J >= 0 else np.zeros(0)
            edges = np.concatenate(([0.0], c, [1.0]))
            pi.extend([a] * (edges.size - 1))
            lo.extend(edges[:-1].tolist())
            hi.extend(edges[1:].tolist())
        return LiftedSpace(self.space, np.array(pi), np.array(lo), np.array(hi))

    def fragment_family(self, lifted: LiftedSpace) -> ExtendingFamily:
        """The lifted family as an extending family of fragments of ``lifted``.

        Stage ``J`` splits into one sub-stage per fragment level; sub-stages
        are indexed by the measure ``u`` at which they are complete.
        """
        stage_of = self.family.stage_index()[lifted.parent_index]
        in_family = stage_of >= 0
        frag = np.flatnonzero(in_family)
        keys = np.lexsort((lifted.lo[frag], stage_of[frag]))
        frag = frag[keys]
        st, lo, hi = stage_of[frag], lifted.lo[frag], lifted.hi[frag]
        brk = np.flatnonzero((np.diff(st) != 0) | (np.diff(lo) != 0)) + 1
        groups = np.split(frag, brk)
        starts = np.concatenate(([0], brk))
        t = self.bounds[st[starts]] + hi[starts] * self.stage_measures[st[starts]]
        return ExtendingFamily(lifted.space, t, tuple(groups))


def lift(family: ExtendingFamily, space: MeasureSpace | None = None, cuts=()) -> tuple[LiftedSpace, LiftedFamily]:
    """Auxiliary space ``X~`` and family ``Omega~_u`` with ``mu~(Omega~_u) = u``."""
    if space is not None and not space.same_as(family.space):
        raise SpaceMismatchError("family is defined on another space")
    lf = LiftedFamily(family)
    return lf.lifted_space(cuts), lf


def lift_field(f: ScalarField, lifted: LiftedSpace) -> ScalarField:
    """``f~(x, y) = f(x)``: every fragment carries its parent's value."""
    if not f.space.same_as(lifted.parent):
        raise SpaceMismatchError("field is not defined on the lifted space's parent")
    return ScalarField(lifted.space, f.values[lifted.parent_index])


class LiftedKernel(Kernel):
    """``A~(k, (x, y)) = A(k, x)`` on the fragments of a lifted space."""

    def __init__(self, parent: Kernel, lifted: LiftedSpace):
        super().__init__(f"lifted:{parent.name}", parent.func, parent.params, parent.bound)
        self.parent = parent
        self.lifted = lifted

    def block(self, grid, space, rows, cols=None):
        if space is not self.lifted.space:
            if space.same_as(self.lifted.parent):
                return self.parent.block(grid, space, rows, cols)
            raise SpaceMismatchError("lifted kernel applied on a foreign space")
        pcols = self.lifted.parent_index if cols is None else self.lifted.parent_index[cols]
        return self.parent.block(grid, self.lifted.parent, rows, pcols)

    def matrix(self, grid, space):
        return self.block(grid, space, slice(None))


def lift_kernel(kernel: Kernel, lifted: LiftedSpace) -> LiftedKernel:
    return LiftedKernel(kernel, lifted)
