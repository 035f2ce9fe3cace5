"""Catalog of concrete kernels with their default geometries and families.

* ``fourier``: ``A(k, x) = exp(ikx)`` on symmetric midpoint grids, family of
  symmetric intervals.  By default ``K = pi N / (2 L)``, which makes the
  discrete operator a scaled DFT, so ``||T||_{2->2} = sqrt(2 pi)`` exactly.
* ``orthonormal``: ``A(k, n) = phi_n(k)`` for the trigonometric or Walsh
  (Paley order) system; family of index prefixes.
* ``pseudodiff``: ``exp(ikx) a(k, x)`` with a bounded separable symbol.
* ``schrodinger_q``: ``A(lambda, y)`` is the cell average of
  ``theta(y, lambda)^2``; with a suffix family the maximal function is
  ``sup_x |int_x^{X_max} theta^2 V|``.
* ``constant``: ``A = 1``; useful for bookkeeping checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .family import ExtendingFamily
from .measure import MeasureSpace, ScalarField
from .operator import Kernel, apply

__all__ = [
    "KernelSpec",
    "PotentialSpec",
    "Scenario",
    "build_kernel",
    "with_size",
    "walsh_paley",
    "potential_field",
    "q_function",
    "q_sweep",
    "cauchy_slopes",
    "VARIANTS",
]

VARIANTS = ("fourier", "orthonormal", "pseudodiff", "schrodinger_q", "constant")
THETA_MODES = ("oscillatory", "cos")
MIN_CELLS_PER_PERIOD = 8


@dataclass(frozen=True)
class PotentialSpec:
    """``V(y) = C (1+y)^{-alpha}``, optionally times ``cos(omega y)``, on ``[0, x_max]``."""

    C: float = 1.0
    alpha: float = 2.0 / 3.0 + 0.05
    x_max: float = 100.0
    omega: float = 0.0

    def __post_init__(self):
        if not (self.C > 0 and self.alpha > 0 and self.x_max > 0):
            raise ValueError("potential needs C, alpha, x_max > 0")

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        v = self.C * (1.0 + y) ** (-self.alpha)
        return v * np.cos(self.omega * y) if self.omega else v


@dataclass(frozen=True)
class KernelSpec:
    variant: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown kernel variant {self.variant!r}; expected one of {VARIANTS}")

    def get(self, key, default=None):
        return self.params.get(key, default)


@dataclass(frozen=True, eq=False)
class Scenario:
    """A kernel with its source space, target grid and default family."""

    name: str
    kernel: Kernel
    space: MeasureSpace
    grid: MeasureSpace
    family: ExtendingFamily
    spec: KernelSpec
    resolved: dict = field(default_factory=dict)

    @property
    def bound(self) -> float | None:
        return self.kernel.bound


def walsh_paley(n, m, bits: int) -> np.ndarray:
    """``w_n`` at the dyadic cell ``m`` of ``[0, 1)`` split into ``2^bits`` cells.

    Paley order: ``w_n = prod_i r_i^{n_i}`` with Rademacher ``r_i`` reading
    binary digit ``i+1`` of the point, i.e. bit ``bits-1-i`` of ``m``.
    """
    n, m = np.broadcast_arrays(np.asarray(n, dtype=np.int64), np.asarray(m, dtype=np.int64))
    rev = np.zeros(m.shape, dtype=np.int64)
    for i in range(bits):
        rev |= ((m >> (bits - 1 - i)) & 1) << i
    return 1 - 2 * (np.bitwise_count(n & rev).astype(np.int64) & 1)


def _cells_per_period_ok(h: float, lam_max: float) -> bool:
    # theta^2 oscillates with period pi / sqrt(lambda)
    return math.pi / math.sqrt(lam_max) / h >= MIN_CELLS_PER_PERIOD - 1e-9


def _theta_sq_cell(mode: str, h: float):
    """Cell average of ``theta(y, lambda)^2`` over ``[y - h/2, y + h/2]``."""
    if mode not in THETA_MODES:
        raise ValueError(f"unknown theta mode {mode!r}")

    def osc(lam, y):
        w = np.sqrt(lam)
        return np.exp(2j * w * y) * np.sinc(w * h / np.pi)

    def cos2(lam, y):
        w = np.sqrt(lam)
        return 0.5 + 0.5 * np.cos(2 * w * y) * np.sinc(w * h / np.pi)

    return osc if mode == "oscillatory" else cos2


def build_kernel(spec: KernelSpec) -> Scenario:
    """Kernel, source space, target grid and default family for ``spec``."""
    v = spec.variant
    p = dict(spec.params)
    cache = bool(p.pop("cache", False))
    if v in ("fourier", "pseudodiff"):
        n = int(p.get("n", 1024))
        L = float(p.get("L", 32.0))
        n_k = int(p.get("n_k", n))
        K = float(p["K"]) if p.get("K") is not None else math.pi * n_k / (2 * L)
        if n < 1 or n_k < 1 or L <= 0 or K <= 0:
            raise ValueError("fourier geometry needs n, n_k >= 1 and L, K > 0")
        space = MeasureSpace.uniform_grid(-L, L, n, prefix="x")
        grid = MeasureSpace.uniform_grid(-K, K, n_k, prefix="k")
        family = ExtendingFamily.symmetric(space)
        resolved = {"n": n, "L": L, "n_k": n_k, "K": K}
        if v == "fourier":
            kernel = Kernel("fourier", lambda k, x: np.exp(1j * k * x), resolved, bound=1.0, cache=cache)
        else:
            amp = float(p.get("amp", 1.0))
            order = float(p.get("order", 1.0))
            phase = float(p.get("phase", 1.0))
            if amp <= 0 or order < 0:
                raise ValueError("symbol needs amp > 0 and order >= 0")
            resolved.update(amp=amp, order=order, phase=phase)

            def pdo(k, x):
                symbol = amp * (1 + k * k) ** (-order / 2) * np.exp(1j * phase * np.cos(x))
                return np.exp(1j * k * x) * symbol

            kernel = Kernel("pseudodiff", pdo, resolved, bound=amp, cache=cache)
        return Scenario(v, kernel, space, grid, family, spec, resolved)

    if v == "orthonormal":
        system = p.get("system", "trig")
        n = int(p.get("n", 256))
        if system == "trig":
            n_k = int(p.get("n_k", n))
            if n_k < n:
                raise ValueError("trig system needs n_k >= n grid points for orthonormality")
            space = MeasureSpace(tuple(f"n{i}" for i in range(n)), np.ones(n), np.arange(n))
            grid = MeasureSpace.uniform_grid(0.0, 2 * math.pi, n_k, prefix="k")
            c = 1.0 / math.sqrt(2 * math.pi)
            kernel = Kernel("trig", lambda k, x: c * np.exp(1j * x * k), {"n": n, "n_k": n_k}, bound=c, cache=cache)
            resolved = {"system": "trig", "n": n, "n_k": n_k}
        elif system == "walsh":
            n_k = int(p.get("n_k", n))
            bits = int(round(math.log2(n_k)))
            if n_k != 1 << bits or n_k < n:
                raise ValueError("walsh system needs a dyadic grid of n_k = 2^j >= n points")
            space = MeasureSpace(tuple(f"n{i}" for i in range(n)), np.ones(n), np.arange(n))
            grid = MeasureSpace.uniform_grid(0.0, 1.0, n_k, prefix="k")

            def walsh(k, x):
                m = np.floor(k * n_k).astype(np.int64)
                return walsh_paley(x.astype(np.int64), m, bits).astype(float)

            kernel = Kernel("walsh", walsh, {"n": n, "n_k": n_k}, bound=1.0, cache=cache)
            resolved = {"system": "walsh", "n": n, "n_k": n_k}
        else:
            raise ValueError(f"unknown orthonormal system {system!r}")
        return Scenario(system, kernel, space, grid, ExtendingFamily.prefix(space), spec, resolved)

    if v == "schrodinger_q":
        pot = PotentialSpec(**p.get("potential", {}))
        lam_min = float(p.get("lam_min", 0.5))
        lam_max = float(p.get("lam_max", 4.0))
        n_lambda = int(p.get("n_lambda", 64))
        mode = p.get("theta", "oscillatory")
        if not (0 < lam_min < lam_max):
            raise ValueError("need 0 < lam_min < lam_max")
        default_h = math.pi / (2 * MIN_CELLS_PER_PERIOD * math.sqrt(lam_max))
        n = int(p.get("n", math.ceil(pot.x_max / default_h)))
        h = pot.x_max / n
        if not _cells_per_period_ok(h, lam_max):
            raise ValueError(
                f"cell width {h:.4g} gives fewer than {MIN_CELLS_PER_PERIOD} cells per period at lambda={lam_max}"
            )
        space = MeasureSpace.uniform_grid(0.0, pot.x_max, n, prefix="y")
        grid = MeasureSpace.uniform_grid(lam_min, lam_max, n_lambda, prefix="lam")
        resolved = {"potential": vars(pot).copy(), "lam_min": lam_min, "lam_max": lam_max,
                    "n_lambda": n_lambda, "theta": mode, "n": n, "h": h}
        kernel = Kernel("schrodinger_q", _theta_sq_cell(mode, h), resolved, bound=1.0, cache=cache)
        return Scenario(v, kernel, space, grid, ExtendingFamily.suffix(space), spec, resolved)

    # constant
    n = int(p.get("n", 16))
    n_k = int(p.get("n_k", 1))
    space = MeasureSpace.from_weights(np.ones(n))
    grid = MeasureSpace.uniform_grid(0.0, 1.0, n_k, prefix="k")
    kernel = Kernel("constant", lambda k, x: np.ones(np.broadcast(k, x).shape), {"n": n, "n_k": n_k}, bound=1.0, cache=cache)
    return Scenario(v, kernel, space, grid, ExtendingFamily.prefix(space), spec, {"n": n, "n_k": n_k})


def with_size(spec: KernelSpec, size: int) -> KernelSpec:
    """The same kernel on ``size`` source atoms (and ``size`` grid points)."""
    params = dict(spec.params)
    params["n"] = int(size)
    if spec.variant in ("fourier", "pseudodiff", "orthonormal", "constant"):
        params["n_k"] = int(size)
    return replace(spec, params=params)


def potential_field(pot: PotentialSpec, space: MeasureSpace) -> ScalarField:
    """``V`` sampled at cell midpoints."""
    return ScalarField(space, pot(space.points))


def q_function(pot: PotentialSpec, theta: str, x: float, lam, cells_per_period: int = 256) -> np.ndarray:
    """``q(x, lambda) = int_x^{X_max} theta(y, lambda)^2 V(y) dy``.

    ``theta^2`` is integrated exactly on each cell against ``V`` at the cell
    midpoint.  The default ``oscillatory`` mode uses ``theta = exp(i sqrt(lambda) y)``;
    ``cos`` uses the real solution, whose mean part ``V/2`` is not
    integrable for ``alpha <= 1`` and grows with ``X_max``.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(lam <= 0):
        raise ValueError("lambda must be positive")
    if not (0 <= x <= pot.x_max):
        raise ValueError(f"x={x} outside [0, {pot.x_max}]")
    if cells_per_period < MIN_CELLS_PER_PERIOD:
        raise ValueError(f"need at least {MIN_CELLS_PER_PERIOD} cells per period")
    length = pot.x_max - x
    if length == 0:
        return np.zeros(lam.size, dtype=complex)
    h_target = math.pi / (cells_per_period * math.sqrt(float(lam.max())))
    n = max(1, math.ceil(length / h_target))
    space = MeasureSpace.uniform_grid(x, pot.x_max, n)
    grid = MeasureSpace.from_weights(np.ones(lam.size), lam)
    kernel = Kernel("theta_sq", _theta_sq_cell(theta, length / n))
    return apply(kernel, potential_field(pot, space), grid).values.copy()


def q_sweep(pot: PotentialSpec, theta: str, lams, xs, cells_per_period: int = 256) -> list[tuple]:
    """Rows ``(lambda, x, re_q, im_q, abs_q)`` for every pair."""
    lams = np.asarray(lams, dtype=float)
    rows = []
    for x in xs:
        q = q_function(pot, theta, float(x), lams, cells_per_period)
        for lam, v in zip(lams.tolist(), q.tolist()):
            rows.append((lam, float(x), v.real, v.imag, abs(v)))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def cauchy_slopes(pot: PotentialSpec, theta: str, lams, doublings: int = 3, cells_per_period: int = 256) -> np.ndarray:
    """Log-log slope of ``|q(0; X) - q(0; 2X)|`` against ``X`` over the doublings.

    ``X`` runs over ``x_max * 2^j``, ``j = 0..doublings``; the slope is the
    least-squares fit to the ``doublings`` Cauchy differences.
    """
    if doublings < 2:
        raise ValueError("need at least two doublings for a slope")
    xs = [pot.x_max * 2 ** j for j in range(doublings + 1)]
    qs = [q_function(replace(pot, x_max=X), theta, 0.0, lams, cells_per_period) for X in xs]
    diffs = np.array([np.abs(qs[j + 1] - qs[j]) for j in range(doublings)])
    logx = np.log(xs[:-1])
    logd = np.log(np.maximum(diffs, np.finfo(float).tiny))
    xc = logx - logx.mean()
    return (xc @ (logd - logd.mean(axis=0))) / (xc @ xc)
