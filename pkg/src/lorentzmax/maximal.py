"""Maximal operator ``M_T f(k) = sup_t |int_{Omega_t} A(k, x) f(x) dmu|`` and
the dyadic machinery used to dominate it by per-scale maximal functions.

The partial integral along the lifted family, ``P(k, u)``, is affine in ``u``
on every stage, so ``|P(k, u)|`` is maximised at stage boundaries and the sup
over ``t`` is a max over stage prefixes.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .family import ExtendingFamily, LiftedFamily
from .measure import MeasureSpace, ScalarField, support
from .operator import Kernel, Region, SpaceMismatchError, map_blocks

__all__ = [
    "InvariantViolation",
    "maximal_function",
    "maximal_with_argsup",
    "DyadicPiece",
    "DyadicPartition",
    "dyadic_partition",
    "select_cover",
    "MaximalReport",
    "per_scale_maximals",
    "Sublinearity",
    "sublinearity_check",
    "DEFAULT_DEPTH",
]

DEFAULT_DEPTH = 40


class InvariantViolation(RuntimeError):
    """A numerically checked inequality failed beyond its tolerance."""


def _base(family) -> tuple[ExtendingFamily, np.ndarray]:
    if isinstance(family, LiftedFamily):
        return family.family, family.origin
    return family, np.arange(len(family))


def _stage_sums(kernel: Kernel, f: ScalarField, family: ExtendingFamily, grid: MeasureSpace, rows: slice) -> np.ndarray:
    """``S[k, j] = sum over stage j of A(k, x) f(x) w(x)`` for grid rows ``rows``."""
    cols = family.order
    fw = (f.values * f.space.weights)[cols]
    block = kernel.block(grid, f.space, rows, cols) * fw[None, :]
    return np.add.reduceat(block, family.offsets[:-1], axis=1)


def _support_family(f: ScalarField, family) -> tuple[ExtendingFamily, np.ndarray]:
    base, origin = _base(family)
    if not base.space.same_as(f.space):
        raise SpaceMismatchError("field and family live on different spaces")
    fam, kept = base.restrict(support(f))
    return fam, origin[kept]


def maximal_with_argsup(
    kernel: Kernel,
    f: ScalarField,
    family,
    grid: MeasureSpace,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """``M_T f`` on the grid and, per grid point, the index of the last stage
    of the maximising prefix (``-1`` for the empty prefix).  Ties go to the
    shortest prefix.
    """
    fam, origin = _support_family(f, family)
    K = len(grid)
    if len(fam) == 0:
        return np.zeros(K), np.full(K, -1, dtype=np.int64)

    def run(rows):
        C = np.cumsum(_stage_sums(kernel, f, fam, grid, rows), axis=1)
        a = np.abs(C)
        j = np.argmax(a, axis=1)
        m = a[np.arange(a.shape[0]), j]
        return m, j

    parts = map_blocks(run, K, threads)
    m = np.concatenate([p[0] for p in parts])
    j = np.concatenate([p[1] for p in parts])
    arg = np.where(m > 0, origin[j], -1)
    return np.where(m > 0, m, 0.0), arg


def maximal_function(kernel: Kernel, f: ScalarField, family, grid: MeasureSpace, threads: int = 1) -> ScalarField:
    """The maximal function ``M_T f`` as a (real, nonnegative) field on ``grid``."""
    m, _ = maximal_with_argsup(kernel, f, family, grid, threads)
    return ScalarField(grid, m)


# -- dyadic partition of the support along the lifted family ------------------

@dataclass(frozen=True)
class DyadicPiece:
    """``E_{m,l}``: measure coordinates ``[lo, hi)`` along the lifted family."""

    m: int
    l: int
    lo: float
    hi: float

    @property
    def measure(self) -> float:
        return self.hi - self.lo

    @property
    def empty(self) -> bool:
        return self.hi <= self.lo


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    """Pieces ``E_{m,l}`` of ``E = supp f`` for ``m_min <= m <= n``.

    Pieces are intervals of the measure coordinate ``u`` of the lifted family
    restricted to ``E``: ``E_{m,l} = Omega~_{(l+1) h} minus Omega~_{l h}`` with
    ``h = 2^m unit``.  Endpoints are exact binary fractions of ``unit``.
    """

    family: LiftedFamily
    support: np.ndarray
    n: int
    unit: float
    m_min: int

    @property
    def total(self) -> float:
        return self.family.total

    @property
    def levels(self) -> range:
        return range(self.n, self.m_min - 1, -1)

    def width(self, m: int) -> float:
        return math.ldexp(self.unit, m)

    def nominal_count(self, m: int) -> int:
        """Number of slots at level ``m``; trailing slots may be empty."""
        return 1 << (self.n - m)

    def count(self, m: int) -> int:
        """Number of nonempty pieces at level ``m``."""
        return int(math.ceil(self.total / self.width(m)))

    def piece(self, m: int, l: int) -> DyadicPiece:
        h = self.width(m)
        return DyadicPiece(m, l, min(l * h, self.total), min((l + 1) * h, self.total))

    def pieces(self, m: int, limit: int = 1 << 20) -> list[DyadicPiece]:
        c = self.count(m)
        if c > limit:
            raise ValueError(f"level {m} has {c} pieces, above limit {limit}")
        return [self.piece(m, l) for l in range(c)]

    def region(self, piece: DyadicPiece) -> Region:
        return self.family.segment(piece.lo, piece.hi)

    def candidates(self, m: int) -> np.ndarray:
        """Indices ``l`` that realise ``max_l |M_{m,l} f(k)|`` for every ``k``.

        A piece with no stage boundary strictly inside is a multiple of one
        stage's slope, so one such piece per stage suffices; the remaining
        pieces are those straddling a boundary and the clipped last piece.
        """
        h = self.width(m)
        c = self.count(m)
        B = self.family.bounds
        if c <= 4 * B.size + 8:
            return np.arange(c)
        q = B / h
        inner = q[1:-1]
        straddle = np.floor(inner)[inner != np.floor(inner)]
        first = np.ceil(q[:-1])
        whole = first[(first + 1) * h <= B[1:]]
        ls = np.unique(np.concatenate((straddle, whole, [c - 1])).astype(np.int64))
        return ls[(ls >= 0) & (ls < c)]


def _scale_exponent(x: float) -> int:
    """Smallest ``n`` with ``x <= 2^n`` (so ``2^{n-1} <= x <= 2^n``)."""
    mant, e = math.frexp(x)
    return e - 1 if mant == 0.5 else e


def dyadic_partition(f: ScalarField, family, m_min: int | None = None, unit: float = 1.0) -> DyadicPartition:
    """Dyadic pieces of ``supp f`` along ``family``, levels ``m_min..n``.

    ``E`` is the part of the support reached by the family.  ``m_min``
    defaults to ``n - 40``.
    """
    if not unit > 0:
        raise ValueError("unit must be positive")
    fam, origin = _support_family(f, family)
    if len(fam) == 0:
        raise ValueError("field has empty support on the family")
    lf = LiftedFamily(fam, origin)
    n = _scale_exponent(lf.total / unit)
    if m_min is None:
        m_min = n - DEFAULT_DEPTH
    if m_min > n:
        raise ValueError(f"m_min={m_min} exceeds top level n={n}")
    return DyadicPartition(lf, support(f), n, float(unit), int(m_min))


def select_cover(partition: DyadicPartition, a: float) -> list[DyadicPiece]:
    """At most one piece per level covering ``[0, a)`` up to ``2^{m_min} unit``.

    Greedy binary development of ``a / unit``: level ``m`` is used iff its
    digit is 1, with ``l = sum_{j>m} a_j 2^{j-m}``.
    """
    if a < 0 or a > partition.total * (1 + 1e-12):
        raise ValueError(f"target measure {a} outside [0, {partition.total}]")
    out, cur = [], 0.0
    for m in partition.levels:
        h = partition.width(m)
        if cur + h <= a:
            out.append(partition.piece(m, int(round(cur / h))))
            cur += h
    return out


# -- per-scale maximal functions and inequality (4) ---------------------------

@dataclass(frozen=True, eq=False)
class MaximalReport:
    """Per grid point: ``M_T f``, arg-sup stage, ``M_m f`` per level, and
    ``slack = sum_m M_m f + tail - M_T f`` (nonnegative up to rounding).

    ``tail = 2^{m_min} unit max_j |slope_j|`` bounds the levels below
    ``m_min``, so the inequality checked is exact, not truncated.
    """

    grid: MeasureSpace
    levels: tuple
    maximal: np.ndarray
    argsup: np.ndarray
    per_scale: np.ndarray
    tail: np.ndarray

    @property
    def dominating_sum(self) -> np.ndarray:
        return self.per_scale.sum(axis=0) + self.tail

    @property
    def slack(self) -> np.ndarray:
        return self.dominating_sum - self.maximal

    def violation(self) -> float:
        """Largest amount by which ``M_T f`` exceeds the dyadic sum."""
        return float(max(0.0, -np.min(self.slack, initial=0.0)))

    def check(self, tol: float = 1e-12) -> None:
        v = self.violation()
        if v > tol:
            raise InvariantViolation(f"dyadic domination violated by {v:.3e} > {tol:.1e}")

    def scale(self, m: int) -> np.ndarray:
        return self.per_scale[self.levels.index(m)]

    def write_csv(self, target) -> None:
        owned = isinstance(target, (str, os.PathLike))
        fh = open(target, "w", encoding="utf-8", newline="") if owned else target
        try:
            cols = ["k", "M_T", "argsup_stage", "slack4"] + [f"M_{m}" for m in self.levels] + ["M_tail"]
            fh.write(",".join(cols) + "\n")
            slack = self.slack
            for i in range(len(self.grid)):
                row = [repr(float(self.grid.points[i])), repr(float(self.maximal[i])), str(int(self.argsup[i])), repr(float(slack[i]))]
                row += [repr(float(v)) for v in self.per_scale[:, i]]
                row.append(repr(float(self.tail[i])))
                fh.write(",".join(row) + "\n")
        finally:
            if owned:
                fh.close()

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def per_scale_maximals(
    kernel: Kernel,
    f: ScalarField,
    partition: DyadicPartition,
    grid: MeasureSpace,
    threads: int = 1,
) -> MaximalReport:
    """``M_m f(k) = max_l |M_{m,l} f(k)|`` for every level and ``M_T f(k)``."""
    lf = partition.family
    fam = lf.family
    B = lf.bounds
    mu = np.concatenate((lf.stage_measures, [1.0]))
    levels = tuple(partition.levels)
    spans = []  # per level: stage index and fill fraction of piece endpoints
    for m in levels:
        ls = partition.candidates(m)
        h = partition.width(m)
        ends = np.minimum(np.concatenate((ls * h, (ls + 1) * h)), partition.total)
        J = np.minimum(np.searchsorted(B, ends, side="right") - 1, len(fam))
        spans.append((J, (ends - B[J]) / mu[J], ls.size))
    tail_width = partition.width(partition.m_min)

    def run(rows):
        S = _stage_sums(kernel, f, fam, grid, rows)
        C = np.concatenate((np.zeros((S.shape[0], 1), dtype=complex), np.cumsum(S, axis=1)), axis=1)
        Sp = np.concatenate((S, np.zeros((S.shape[0], 1), dtype=complex)), axis=1)
        absC = np.abs(C)
        jmax = np.argmax(absC, axis=1)
        mt = absC[np.arange(absC.shape[0]), jmax]
        per = np.empty((len(levels), S.shape[0]))
        for i, (J, frac, size) in enumerate(spans):
            # exact C at stage boundaries (frac == 0) keeps aligned pieces bit-identical
            P = C[:, J] + frac[None, :] * Sp[:, J]
            per[i] = np.max(np.abs(P[:, size:] - P[:, :size]), axis=1)
        tail = tail_width * np.max(np.abs(S) / lf.stage_measures[None, :], axis=1)
        return mt, jmax, per, tail

    parts = map_blocks(run, len(grid), threads)
    mt = np.concatenate([p[0] for p in parts])
    jmax = np.concatenate([p[1] for p in parts])
    arg = np.where(mt > 0, lf.origin[np.maximum(jmax - 1, 0)], -1)
    per = np.concatenate([p[2] for p in parts], axis=1)
    tail = np.concatenate([p[3] for p in parts])
    return MaximalReport(grid, levels, mt, arg, per, tail)


class Sublinearity(NamedTuple):
    additive: float
    homogeneity: float


def sublinearity_check(
    kernel: Kernel,
    f: ScalarField,
    g: ScalarField,
    family,
    grid: MeasureSpace,
    scalars=(-2.5, 0.5j, 3 + 4j, 0.0),
    threads: int = 1,
) -> Sublinearity:
    """Worst ``M(f+g) - Mf - Mg`` and worst relative ``|M(bf) - |b| Mf|``."""
    mf = maximal_function(kernel, f, family, grid, threads).values.real
    mg = maximal_function(kernel, g, family, grid, threads).values.real
    mfg = maximal_function(kernel, f + g, family, grid, threads).values.real
    additive = float(max(0.0, np.max(mfg - mf - mg, initial=0.0)))
    scale = max(float(np.max(mf, initial=0.0)), np.finfo(float).tiny)
    hom = 0.0
    for b in scalars:
        mb = maximal_function(kernel, f.scaled(b), family, grid, threads).values.real
        hom = max(hom, float(np.max(np.abs(mb - abs(b) * mf), initial=0.0)) / (max(abs(b), 1.0) * scale))
    return Sublinearity(additive, hom)
