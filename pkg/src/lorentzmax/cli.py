"""Command line experiment runner.

Every subcommand reads an optional YAML/JSON config, applies flag overrides,
runs one scenario and writes its CSV/JSON artifacts plus ``manifest.json``
into the output directory.

Precedence, lowest to highest: built-in defaults, ``$LORENTZMAX_OUT`` (output
directory only), the config file, command-line flags.

Exit status: 0 success, 2 invalid input or config, 3 invariant violated.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from .family import ExtendingFamily
from .interpolation import interpolate_exponents, random_field, trial_seed, verify_maximal_bound
from .kernels import KernelSpec, PotentialSpec, build_kernel, cauchy_slopes, q_sweep, with_size
from .lorentz import INF, LorentzIndex, norm_via_maximal_average, quasinorm
from .maximal import InvariantViolation, dyadic_partition, maximal_with_argsup, per_scale_maximals
from .measure import ScalarField, read_field, rearrange
from .operator import SpaceMismatchError

SCENARIOS = ("rearrange", "norm", "maximal", "decompose", "verify-bound", "sweep-q")
OUT_ENV = "LORENTZMAX_OUT"

EXIT_OK, EXIT_INVALID, EXIT_INVARIANT = 0, 2, 3

DEFAULTS = {
    "seed": None,
    "out": "lorentzmax-out",
    "threads": 1,
    "trials": 100,
    "sizes": [256, 1024],
    "field": None,
    "kernel": None,
    "family": {"type": "default"},
    "exponents": {"p1": 1.0, "s1": "inf", "p2": 2.0, "s2": 2.0, "r": 0.5, "q": None, "q_prime": None},
    "norm": {"p": 2.0, "q": 2.0},
    "decompose": {"m_min": None, "unit": 1.0, "tol": 1e-12},
    "sweep": {
        "theta": "oscillatory",
        "potential": {},
        "lambdas": {"min": 0.5, "max": 4.0, "count": 64},
        "xs": [0.0],
        "cells_per_period": 256,
        "doublings": 0,
    },
}

# kernel used when the config names none
DEFAULT_KERNEL = {
    "rearrange": {"variant": "constant"},
    "norm": {"variant": "constant"},
    "maximal": {"variant": "fourier", "n": 256},
    "decompose": {"variant": "fourier", "n": 256},
    "verify-bound": {"variant": "fourier"},
    "sweep-q": {"variant": "schrodinger_q"},
}


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict) and k not in ("kernel", "family", "potential", "lambdas"):
            out[k] = _merge(base[k], v, f"{path}{k}.")
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed config {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return data


def resolve_config(scenario: str, args: argparse.Namespace, env=os.environ) -> dict:
    """Defaults, then env, then config file, then flags."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    cfg = copy.deepcopy(DEFAULTS)
    if env.get(OUT_ENV):
        cfg["out"] = env[OUT_ENV]
    user = load_config(getattr(args, "config", None))
    named = user.pop("scenario", scenario)
    if named != scenario:
        raise ConfigError(f"config is for scenario {named!r}, not {scenario!r}")
    cfg = _merge(cfg, user)
    for key in ("seed", "out", "threads", "trials", "field"):
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if getattr(args, "sizes", None):
        cfg["sizes"] = list(args.sizes)
    cfg["scenario"] = scenario
    if cfg["kernel"] is None:
        cfg["kernel"] = dict(DEFAULT_KERNEL[scenario])
    if not isinstance(cfg["kernel"], dict) or "variant" not in cfg["kernel"]:
        raise ConfigError("kernel must be a mapping with a 'variant' key")
    if not isinstance(cfg["threads"], int) or cfg["threads"] < 1:
        raise ConfigError("threads must be a positive integer")
    if not isinstance(cfg["trials"], int) or cfg["trials"] < 0:
        raise ConfigError("trials must be a nonnegative integer")
    if cfg["seed"] is not None and (not isinstance(cfg["seed"], int) or cfg["seed"] < 0):
        raise ConfigError("seed must be a nonnegative integer")
    randomized = scenario == "verify-bound" or (scenario != "sweep-q" and cfg["field"] is None)
    if randomized and cfg["seed"] is None:
        raise ConfigError(f"scenario {scenario!r} draws random data and needs a seed")
    return cfg


def _kernel_spec(cfg: dict) -> KernelSpec:
    params = {k: v for k, v in cfg["kernel"].items() if k != "variant"}
    return KernelSpec(cfg["kernel"]["variant"], params)


def _scenario(cfg: dict, field: ScalarField | None):
    spec = _kernel_spec(cfg)
    if field is not None and spec.variant == "constant":
        spec = with_size(spec, len(field.space))
    scn = build_kernel(spec)
    if field is not None and spec.variant == "constant":
        # A = 1 does not look at coordinates, so the field's own space is used
        scn = type(scn)(scn.name, scn.kernel, field.space, scn.grid,
                        ExtendingFamily.prefix(field.space), scn.spec, scn.resolved)
    cfg["kernel"] = {"variant": spec.variant, **scn.resolved}
    return scn


def _family(cfg: dict, scn) -> ExtendingFamily:
    fam = cfg["family"]
    kind = fam.get("type", "default")
    if kind == "default":
        return scn.family
    lookup = {aid: i for i, aid in enumerate(scn.space.ids)}

    def index(a):
        if isinstance(a, str):
            if a not in lookup:
                raise ConfigError(f"family refers to unknown atom {a!r}")
            return lookup[a]
        return int(a)

    if kind == "prefix":
        order = fam.get("order")
        order = None if order is None else [index(a) for a in order]
        return ExtendingFamily.prefix(scn.space, order)
    if kind == "stages":
        stages = fam.get("stages")
        if not stages:
            raise ConfigError("family of type 'stages' needs a nonempty 'stages' list")
        return ExtendingFamily.from_stages(scn.space, [[index(a) for a in s] for s in stages])
    raise ConfigError(f"unknown family type {kind!r}")


def _input_field(cfg: dict, scn, family, f: ScalarField | None) -> ScalarField:
    if f is None:
        rng = np.random.default_rng(trial_seed(cfg["seed"], 0))
        return random_field(scn.space, family, rng)
    if f.space.same_as(scn.space):
        return f
    if f.space.ids == scn.space.ids and np.allclose(f.space.weights, scn.space.weights, rtol=1e-12, atol=0):
        return ScalarField(scn.space, f.values)
    raise SpaceMismatchError("field file atoms do not match the kernel's source space")


def _read_cli_field(cfg: dict) -> ScalarField | None:
    if cfg["field"] is None:
        return None
    return read_field(cfg["field"])


def _index(d: dict) -> LorentzIndex:
    return LorentzIndex(d["p"], d["q"])


def _json_value(v):
    if v is INF:
        return "inf"
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, Path):
        return str(v)
    raise TypeError(f"not serializable: {type(v).__name__}")


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_value) + "\n", encoding="utf-8")


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# -- scenarios -----------------------------------------------------------------

def _run_rearrange(cfg, out: Path) -> tuple[dict, int]:
    field = _read_cli_field(cfg)
    scn = _scenario(cfg, field)
    f = _input_field(cfg, scn, _family(cfg, scn), field)
    prof = rearrange(f)
    rows = [(repr(float(a)), repr(float(b)), repr(float(h))) for a, b, h in zip(prof.starts, prof.ends, prof.heights)]
    _write_rows(out / "rearrangement.csv", ("t_start", "t_end", "value"), rows)
    return {"support_measure": prof.support_measure, "plateaus": len(rows)}, EXIT_OK


def _run_norm(cfg, out: Path) -> tuple[dict, int]:
    field = _read_cli_field(cfg)
    scn = _scenario(cfg, field)
    f = _input_field(cfg, scn, _family(cfg, scn), field)
    idx = _index(cfg["norm"])
    summary = {"p": str(idx.p) if idx.p is INF else idx.p, "q": str(idx.q) if idx.q is INF else idx.q,
               "quasinorm": quasinorm(f, idx)}
    if idx.p is not INF and idx.p > 1:
        summary["norm_via_maximal_average"] = norm_via_maximal_average(f, idx)
    return summary, EXIT_OK


def _run_maximal(cfg, out: Path) -> tuple[dict, int]:
    field = _read_cli_field(cfg)
    scn = _scenario(cfg, field)
    family = _family(cfg, scn)
    f = _input_field(cfg, scn, family, field)
    mt, arg = maximal_with_argsup(scn.kernel, f, family, scn.grid, cfg["threads"])
    rows = [(repr(float(k)), repr(float(m)), str(int(a))) for k, m, a in zip(scn.grid.points, mt, arg)]
    _write_rows(out / "maximal.csv", ("k", "M_T", "argsup_stage"), rows)
    return {"max_M_T": float(np.max(mt, initial=0.0)), "grid_points": len(scn.grid)}, EXIT_OK


def _run_decompose(cfg, out: Path) -> tuple[dict, int]:
    field = _read_cli_field(cfg)
    scn = _scenario(cfg, field)
    family = _family(cfg, scn)
    f = _input_field(cfg, scn, family, field)
    dec = cfg["decompose"]
    part = dyadic_partition(f, family, m_min=dec["m_min"], unit=float(dec["unit"]))
    dec["m_min"] = part.m_min
    report = per_scale_maximals(scn.kernel, f, part, scn.grid, cfg["threads"])
    report.write_csv(out / "decompose.csv")
    violation = report.violation()
    summary = {"n": part.n, "m_min": part.m_min, "unit": part.unit, "levels": len(report.levels),
               "violation": violation, "min_slack": float(np.min(report.slack))}
    status = EXIT_INVARIANT if violation > float(dec["tol"]) else EXIT_OK
    return summary, status


def _run_verify(cfg, out: Path) -> tuple[dict, int]:
    if cfg["family"].get("type", "default") != "default":
        raise ConfigError("verify-bound uses each kernel's default family")
    e = cfg["exponents"]
    profile = interpolate_exponents(e["p1"], e["s1"], e["p2"], e["s2"], e["r"], q=e["q"], q_prime=e["q_prime"])
    resolved = profile.as_dict()
    e.update(q=resolved["q"], q_prime=resolved["q_prime"])
    sizes = [int(s) for s in cfg["sizes"]]
    if not sizes or min(sizes) < 1:
        raise ConfigError("sizes must be a nonempty list of positive integers")
    spec = _kernel_spec(cfg)
    kernels = {}

    def build(size):
        scn = build_kernel(with_size(spec, size))
        kernels[str(size)] = {"variant": spec.variant, **scn.resolved}
        return scn

    report = verify_maximal_bound(build, profile, cfg["trials"], sizes, cfg["seed"], threads=cfg["threads"])
    cfg["kernel"] = {"variant": spec.variant, **{k: v for k, v in spec.params.items() if k not in ("n", "n_k")}}
    cfg["kernel_per_size"] = kernels
    report.write_csv(out / "trials.csv")
    return report.summary(), EXIT_OK


def _run_sweep(cfg, out: Path) -> tuple[dict, int]:
    sw = cfg["sweep"]
    pot = PotentialSpec(**sw["potential"])
    sw["potential"] = vars(pot).copy()
    lam = sw["lambdas"]
    lams = np.asarray(lam, dtype=float) if isinstance(lam, list) else np.linspace(lam["min"], lam["max"], int(lam["count"]))
    if lams.size == 0 or np.any(lams <= 0):
        raise ConfigError("lambdas must be positive")
    cpp = int(sw["cells_per_period"])
    rows = q_sweep(pot, sw["theta"], lams, sw["xs"], cells_per_period=cpp)
    _write_rows(out / "sweep.csv", ("lambda", "x", "re_q", "im_q", "abs_q"),
                [[repr(float(v)) for v in r] for r in rows])
    summary = {"rows": len(rows)}
    if int(sw["doublings"]) > 0:
        slopes = cauchy_slopes(pot, sw["theta"], lams, doublings=int(sw["doublings"]), cells_per_period=cpp)
        _write_rows(out / "cauchy.csv", ("lambda", "log_slope"),
                    [(repr(float(a)), repr(float(b))) for a, b in zip(lams, slopes)])
        summary["negative_slope_fraction"] = float(np.mean(slopes < 0))
    cfg.pop("kernel", None)
    return summary, EXIT_OK


RUNNERS = {
    "rearrange": _run_rearrange,
    "norm": _run_norm,
    "maximal": _run_maximal,
    "decompose": _run_decompose,
    "verify-bound": _run_verify,
    "sweep-q": _run_sweep,
}


def run(cfg: dict) -> int:
    """Execute a resolved config; returns the exit status."""
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as e:
        raise ConfigError(f"output directory {out} is not writable: {e}") from e
    summary, status = RUNNERS[cfg["scenario"]](cfg, out)
    _write_json(out / "summary.json", summary)
    _write_json(out / "manifest.json", {"config": cfg, "status": status})
    return status


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON config file")
    common.add_argument("--seed", type=int, help="run seed (required when data are drawn at random)")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./lorentzmax-out)")
    common.add_argument("--threads", type=int, help="worker threads")
    common.add_argument("--trials", type=int, help="trials per size")
    common.add_argument("--field", help="input field file: 'id weight re im' per line")
    common.add_argument("--sizes", type=int, nargs="+", help="problem sizes for verify-bound")

    parser = argparse.ArgumentParser(prog="lorentzmax", description="Maximal-function experiments on finite measure spaces.")
    sub = parser.add_subparsers(dest="scenario", required=True)
    helps = {
        "rearrange": "decreasing rearrangement of a field",
        "norm": "Lorentz quasinorm and maximal-average norm",
        "maximal": "maximal function over an extending family",
        "decompose": "dyadic decomposition and domination check",
        "verify-bound": "seeded norm-ratio trials across sizes",
        "sweep-q": "Schrodinger q-function sweep",
    }
    for name in SCENARIOS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.scenario, args)
        return run(cfg)
    except InvariantViolation as e:
        print(f"lorentzmax: invariant violated: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ValueError, TypeError, KeyError, OSError) as e:
        print(f"lorentzmax: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
