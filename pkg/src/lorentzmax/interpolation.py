"""Exponent arithmetic and the empirical verification engine for the bound
``||M_T f||_{s_r q} <= C ||f||_{p_r q}``.

Every constant produced here is an observed maximum over seeded trials, a
lower estimate of the true operator constant, never a proof of boundedness.
"""

from __future__ import annotations

import csv
import io
import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .family import ExtendingFamily
from .lorentz import INF, Exponent, LorentzIndex, from_recip, lp_norm, quasinorm, recip
from .maximal import maximal_function
from .measure import MeasureSpace, ScalarField, indicator
from .operator import Kernel, apply, apply_on_region

__all__ = [
    "ExponentProfile",
    "interpolate_pair",
    "interpolate_exponents",
    "trial_seed",
    "random_field",
    "estimate_endpoint_constant",
    "TrialRecord",
    "VerificationReport",
    "verify_maximal_bound",
    "characteristic_bound_ratios",
    "CSV_COLUMNS",
]


def _exp(e) -> Exponent:
    if e is INF:
        return INF
    if isinstance(e, str):
        return INF if e.strip().lower() in ("inf", "infinity") else float(e)
    return INF if math.isinf(float(e)) else float(e)


def interpolate_pair(p1, s1, p2, s2, r: float) -> tuple[Exponent, Exponent]:
    """``1/p_r = (1-r)/p_1 + r/p_2`` and likewise for ``s``; ``r`` in ``[0, 1]``."""
    if r == 0:
        return _exp(p1), _exp(s1)
    if r == 1:
        return _exp(p2), _exp(s2)
    ip = (1 - r) * recip(_exp(p1)) + r * recip(_exp(p2))
    is_ = (1 - r) * recip(_exp(s1)) + r * recip(_exp(s2))
    return from_recip(ip), from_recip(is_)


def _gt(a: Exponent, b: Exponent) -> bool:
    return recip(a) < recip(b)


def _fmt(e: Exponent):
    return "inf" if e is INF else e


@dataclass(frozen=True)
class ExponentProfile:
    """Endpoint exponents, interpolation parameter and derived exponents.

    The proof-chain fields (``r3``, ``r4`` and their exponents, ``q_prime``)
    describe the intermediate exponents ``s_1 > s_3 > s_r > s_4 > s_2`` and
    ``q' > max(p_3, p_4)`` at which the dyadic estimates are run.
    """

    p1: Exponent
    s1: Exponent
    p2: Exponent
    s2: Exponent
    r: float
    q: Exponent
    p_r: Exponent
    s_r: Exponent
    r3: float
    r4: float
    p3: Exponent
    s3: Exponent
    p4: Exponent
    s4: Exponent
    q_prime: float

    @property
    def input_index(self) -> LorentzIndex:
        return LorentzIndex(self.p_r, self.q)

    @property
    def output_index(self) -> LorentzIndex:
        return LorentzIndex(self.s_r, self.q)

    def chain(self) -> list[tuple[str, Exponent, Exponent]]:
        return [("3", self.p3, self.s3), ("4", self.p4, self.s4)]

    def as_dict(self) -> dict:
        return {k: _fmt(v) for k, v in asdict(self).items()}


def interpolate_exponents(
    p1, s1, p2, s2, r: float, q=None,
    r3: float | None = None, r4: float | None = None, q_prime: float | None = None,
) -> ExponentProfile:
    """Validate endpoints and derive ``(p_r, s_r)`` and the proof-chain exponents.

    ``q`` defaults to ``p_r``; ``r3``/``r4`` default to ``r/2`` and
    ``(1+r)/2``; ``q_prime`` defaults to ``2 max(p_3, p_4)``.
    """
    p1, s1, p2, s2 = (_exp(e) for e in (p1, s1, p2, s2))
    for name, e in (("p1", p1), ("s1", s1), ("p2", p2), ("s2", s2)):
        if e is not INF and e < 1:
            raise ValueError(f"{name} must be >= 1, got {e}")
    if not _gt(s1, s2):
        raise ValueError("need s1 > s2")
    if recip(p1) == recip(p2):
        raise ValueError("need p1 != p2")
    if not (0 < r < 1):
        raise ValueError(f"r must lie in (0, 1), got {r}")
    p_r, s_r = interpolate_pair(p1, s1, p2, s2, r)
    q = p_r if q is None else _exp(q)
    if q is not INF and q < 1:
        raise ValueError("q must be >= 1")
    r3 = r / 2 if r3 is None else float(r3)
    r4 = (1 + r) / 2 if r4 is None else float(r4)
    if not (0 < r3 < r < r4 < 1):
        raise ValueError("need 0 < r3 < r < r4 < 1")
    p3, s3 = interpolate_pair(p1, s1, p2, s2, r3)
    p4, s4 = interpolate_pair(p1, s1, p2, s2, r4)
    if INF in (p3, p4):
        raise ValueError("chain exponents p3, p4 must be finite")
    qp = 2 * max(p3, p4) if q_prime is None else float(q_prime)
    if not qp > max(p3, p4):
        raise ValueError("need q' > max(p3, p4)")
    return ExponentProfile(p1, s1, p2, s2, float(r), q, p_r, s_r, r3, r4, p3, s3, p4, s4, qp)


# -- trial generation ---------------------------------------------------------

def trial_seed(seed: int, *counter: int) -> int:
    """Per-trial seed derived from the run seed and a counter tuple."""
    return int(np.random.SeedSequence([int(seed), *map(int, counter)]).generate_state(1, np.uint64)[0])


def random_field(
    space: MeasureSpace,
    family: ExtendingFamily,
    rng: np.random.Generator,
    pareto: float = 1.5,
) -> ScalarField:
    """Random union of family stages carrying Pareto magnitudes and random phases."""
    n = len(family)
    density = rng.uniform(0.05, 1.0)
    chosen = rng.random(n) < density
    if not chosen.any():
        chosen[rng.integers(n)] = True
    atoms = np.concatenate([family.stages[j] for j in np.flatnonzero(chosen)])
    v = np.zeros(len(space), dtype=complex)
    mag = 1.0 + rng.pareto(pareto, atoms.size)
    v[atoms] = mag * np.exp(2j * np.pi * rng.random(atoms.size))
    return ScalarField(space, v)


def estimate_endpoint_constant(
    kernel: Kernel,
    space: MeasureSpace,
    grid: MeasureSpace,
    idx_in: LorentzIndex,
    idx_out: LorentzIndex,
    generator: Callable[[np.random.Generator], ScalarField],
    trials: int,
    seed: int = 0,
) -> float:
    """Largest observed ``||Tf||_{idx_out} / ||f||_{idx_in}`` (lower estimate)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    best = 0.0
    for i in range(trials):
        f = generator(np.random.default_rng(trial_seed(seed, i)))
        den = quasinorm(f, idx_in)
        if den == 0:
            continue
        best = max(best, quasinorm(apply(kernel, f, grid), idx_out) / den)
    return best


# -- bound verification ---------------------------------------------------------

CSV_COLUMNS = ("kernel", "size", "trial", "seed", "p_r", "s_r", "q", "norm_in", "norm_out", "ratio")


@dataclass(frozen=True)
class TrialRecord:
    kernel: str
    size: int
    trial: int
    seed: int
    p_r: float
    s_r: float
    q: float
    norm_in: float
    norm_out: float
    ratio: float
    ratio_T: float
    chain: dict = field(default_factory=dict)

    def csv_row(self) -> list[str]:
        out = []
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            if v is INF:
                out.append("inf")
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        return out


@dataclass
class VerificationReport:
    """Per-trial ratios and per-size aggregates."""

    profile: ExponentProfile
    records: list = field(default_factory=list)
    endpoint_constants: dict = field(default_factory=dict)

    def sizes(self) -> list[int]:
        return sorted({r.size for r in self.records})

    def ratios(self, size: int) -> np.ndarray:
        return np.array([r.ratio for r in self.records if r.size == size])

    def max_ratio(self, size: int) -> float:
        return float(np.max(self.ratios(size)))

    def growth(self) -> float:
        """Max ratio at the largest size over max ratio at the smallest."""
        s = self.sizes()
        return self.max_ratio(s[-1]) / self.max_ratio(s[0])

    def chain_constants(self) -> dict:
        """Observed ``B_i(q')`` surrogate per chain endpoint, max over trials."""
        out: dict = {}
        for r in self.records:
            for k, v in r.chain.items():
                out[k] = max(out.get(k, 0.0), v)
        return out

    def summary(self) -> dict:
        per = {}
        for s in self.sizes():
            x = self.ratios(s)
            per[str(s)] = {
                "trials": int(x.size),
                "max_ratio": float(x.max()),
                "median_ratio": float(statistics.median(x.tolist())),
                "max_ratio_T": float(max(r.ratio_T for r in self.records if r.size == s)),
            }
        out = {"profile": self.profile.as_dict(), "per_size": per, "trials": len(self.records)}
        if len(per) >= 2:
            out["growth_largest_over_smallest"] = self.growth()
        if self.records and self.records[0].chain:
            out["chain_constants"] = self.chain_constants()
        if self.endpoint_constants:
            out["endpoint_constants"] = self.endpoint_constants
        return out

    def write_csv(self, target) -> None:
        owned = isinstance(target, (str, os.PathLike))
        fh = open(target, "w", encoding="utf-8", newline="") if owned else target
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in self.records:
                w.writerow(r.csv_row())
        finally:
            if owned:
                fh.close()

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _dyadic_exponent(x: float) -> int:
    mant, e = math.frexp(x)
    return e - 1 if mant == 0.5 else e


def _run_trial(scn, profile: ExponentProfile, size: int, trial: int, seed: int, generator) -> TrialRecord:
    tseed = trial_seed(seed, size, trial)
    rng = np.random.default_rng(tseed)
    f = generator(scn.space, scn.family, rng)
    mf = maximal_function(scn.kernel, f, scn.family, scn.grid)
    norm_in = quasinorm(f, profile.input_index)
    norm_out = quasinorm(mf, profile.output_index)
    t_full = apply_on_region(scn.kernel, f, scn.family.prefix_region(len(scn.family)), scn.grid)
    chain = {}
    mu_e = float(np.sum(scn.space.weights[f.abs > 0]))
    n = _dyadic_exponent(mu_e)
    lq = lp_norm(f, profile.q_prime)
    for name, p_i, s_i in profile.chain():
        lhs = quasinorm(mf, LorentzIndex(s_i, profile.q_prime))
        rhs = 2.0 ** (n * (1 / p_i - 1 / profile.q_prime)) * lq
        chain[name] = lhs / rhs
    return TrialRecord(
        kernel=scn.kernel.name, size=size, trial=trial, seed=tseed,
        p_r=_fmt(profile.p_r), s_r=_fmt(profile.s_r), q=_fmt(profile.q),
        norm_in=norm_in, norm_out=norm_out,
        ratio=norm_out / norm_in if norm_in > 0 else 0.0,
        ratio_T=quasinorm(t_full, profile.output_index) / norm_in if norm_in > 0 else 0.0,
        chain=chain,
    )


def verify_maximal_bound(
    build: Callable[[int], object],
    profile: ExponentProfile,
    trials: int,
    sizes: Sequence[int],
    seed: int,
    generator=random_field,
    threads: int = 1,
) -> VerificationReport:
    """Ratios ``||M_T f||_{s_r q} / ||f||_{p_r q}`` over seeded trials per size.

    ``build(size)`` returns a scenario with ``kernel``, ``space``, ``grid``
    and ``family`` attributes.  Trial ``i`` at size ``N`` draws from the seed
    ``trial_seed(seed, N, i)``, so results do not depend on ``threads``.
    """
    report = VerificationReport(profile)
    for size in sizes:
        scn = build(size)
        if trials <= 0:
            continue

        def one(i, scn=scn, size=size):
            return _run_trial(scn, profile, size, i, seed, generator)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                report.records.extend(ex.map(one, range(trials)))
        else:
            report.records.extend(one(i) for i in range(trials))
    return report


def characteristic_bound_ratios(
    scn,
    profile: ExponentProfile,
    log2_measures: Sequence[int],
    seed: int = 0,
    samples: int = 3,
) -> dict[str, np.ndarray]:
    """``||M_T chi(E)||_{s_i q'} / mu(E)^{1/p_i}`` for each chain endpoint.

    For every requested ``mu(E) = 2^j`` the largest ratio over ``samples``
    sets is kept: the leading family prefix of that measure plus random
    unions of stages.  Sets are grown stage by stage until they reach the
    target measure, so ``mu(E)`` can exceed it by less than one stage.
    """
    fam = scn.family
    sm = fam.stage_measures
    out = {name: np.zeros(len(log2_measures)) for name, _, _ in profile.chain()}
    for i, j in enumerate(log2_measures):
        target = 2.0 ** j
        if target > sm.sum() * (1 + 1e-12):
            raise ValueError(f"measure 2^{j} exceeds the family's total {sm.sum()}")
        for s in range(samples):
            order = np.arange(len(fam)) if s == 0 else np.random.default_rng(trial_seed(seed, j, s)).permutation(len(fam))
            stop = int(np.searchsorted(np.cumsum(sm[order]), target * (1 - 1e-12))) + 1
            atoms = np.concatenate([fam.stages[k] for k in order[:stop]])
            chi = indicator(scn.space, atoms)
            mu = scn.space.measure(atoms)
            mf = maximal_function(scn.kernel, chi, fam, scn.grid)
            for name, p_i, s_i in profile.chain():
                r = quasinorm(mf, LorentzIndex(s_i, profile.q_prime)) / mu ** (1 / p_i)
                out[name][i] = max(out[name][i], r)
    return out
