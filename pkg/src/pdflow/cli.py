"""Command-line front end.

Invoked as ``python -m pdflow``.  A run is described by flags, by a config
file, or both; flag values override file values.  The config format is flat
``key = value`` text with dotted keys, ``#`` comments and blank lines
ignored; later duplicates of a key win.  Recognized keys:

    problem, out, jobs, samples, ablation,
    m, n, e, mdim, ndim, seed,
    gamma.kind, gamma.alpha, beta.exp,
    eps.kind, eps.c, eps.r,
    theta, sigma, t0, tf,
    integrator.rtol, integrator.atol, integrator.h_init,
    integrator.h_min, integrator.h_max, integrator.max_steps,
    integrator.safety

``eps.kind = zero`` requests the unregularized flow and is treated as the
ablation switch (dropping the term and scheduling it to zero are the same
dynamics).  ``eps.r`` and the ``--r`` flag accept a comma-separated list;
more than one value fans the sweep out into run_000, run_001, ... under the
output directory (``--jobs`` controls worker threads).

Exit codes: 0 success, 1 bad arguments or failed validation, 2 integration
failure (the abort time is printed to standard error).  Output files are
written to a temporary name and renamed, so a crash never leaves a partial
file behind.

The integrator defaults cap work at 10^7 attempted steps; long horizons on
oscillatory problems need a larger ``integrator.max_steps`` in the config
file (the flow's dual block oscillates faster as t grows, so step counts
scale roughly with tf^3 for the default schedules).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import ExperimentSpec, run_experiment, run_sweep
from .integrator import IntegratorSettings

__all__ = ["main", "parse_config", "build_specs"]


def _boolean(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float_list(text: str):
    return [float(part) for part in text.split(",") if part.strip() != ""]


# config key -> (destination, parser)
_CONFIG_KEYS = {
    "problem": ("problem", str),
    "out": ("out", str),
    "jobs": ("jobs", int),
    "samples": ("samples", int),
    "ablation": ("ablation", _boolean),
    "m": ("m", float),
    "n": ("n", float),
    "e": ("e", float),
    "mdim": ("mdim", int),
    "ndim": ("ndim", int),
    "seed": ("seed", int),
    "gamma.kind": ("gamma_kind", str),
    "gamma.alpha": ("alpha", float),
    "beta.exp": ("beta_exp", float),
    "eps.kind": ("eps_kind", str),
    "eps.c": ("eps_c", float),
    "eps.r": ("r", _float_list),
    "theta": ("theta", float),
    "sigma": ("sigma", float),
    "t0": ("t0", float),
    "tf": ("tf", float),
    "integrator.rtol": ("rtol", float),
    "integrator.atol": ("atol", float),
    "integrator.h_init": ("h_init", float),
    "integrator.h_min": ("h_min", float),
    "integrator.h_max": ("h_max", float),
    "integrator.max_steps": ("max_steps", int),
    "integrator.safety": ("safety", float),
}


def parse_config(path) -> dict:
    """Read a flat key = value file into a destination -> value dict."""
    out = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        dest, cast = _CONFIG_KEYS[key]
        try:
            out[dest] = cast(value)
        except ValueError as err:
            raise ValueError(f"{path}:{lineno}: bad value for {key!r}: {err}")
    return out


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; this front end reserves
    # 2 for integration failures, so remap to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="python -m pdflow",
        description="Integrate the damped primal-dual flow and report "
                    "convergence diagnostics.",
        formatter_class=lambda prog: argparse.ArgumentDefaultsHelpFormatter(
            prog, width=96),
    )
    parser.add_argument("--config", metavar="PATH",
                        help="flat key = value config file; flags override it")
    parser.add_argument("--out", metavar="DIR", default=None,
                        help="output directory (default: out)")
    parser.add_argument("--problem", choices=("toy", "qp"), default=None,
                        help="scenario to run (default: toy)")
    parser.add_argument("--m", type=float, default=None,
                        help="toy objective coefficient (default: 1)")
    parser.add_argument("--n", type=float, default=None,
                        help="toy objective coefficient (default: 1)")
    parser.add_argument("--e", type=float, default=None,
                        help="toy objective coefficient (default: 1)")
    parser.add_argument("--mdim", type=int, default=None,
                        help="QP constraint rows (default: 30)")
    parser.add_argument("--ndim", type=int, default=None,
                        help="QP variables (default: 50)")
    parser.add_argument("--seed", type=int, default=None,
                        help="QP generator seed (default: 1)")
    parser.add_argument("--alpha", type=float, default=None,
                        help="damping strength (default: 13)")
    parser.add_argument("--beta-exp", type=float, default=None,
                        help="time-scaling exponent, beta(t) = t^b (default: 1)")
    parser.add_argument("--r", default=None, metavar="R[,R...]",
                        help="regularization decay exponent(s); a comma list "
                             "runs a sweep (default: 1.1)")
    parser.add_argument("--eps-c", type=float, default=None,
                        help="regularization scale (default: 3 for toy, 1 for qp)")
    parser.add_argument("--theta", type=float, default=None,
                        help="coupling weight (default: condition boundary "
                             "for the chosen damping)")
    parser.add_argument("--sigma", type=float, default=None,
                        help="augmented Lagrangian penalty (default: 1)")
    parser.add_argument("--t0", type=float, default=None,
                        help="start time (default: 1)")
    parser.add_argument("--tf", type=float, default=None,
                        help="end time (default: 1000)")
    parser.add_argument("--rtol", type=float, default=None,
                        help="relative tolerance (default: 1e-06)")
    parser.add_argument("--atol", type=float, default=None,
                        help="absolute tolerance (default: 1e-09)")
    parser.add_argument("--samples", type=int, default=None,
                        help="log-spaced output samples (default: 400)")
    parser.add_argument("--ablation", action="store_true", default=None,
                        help="disable the regularization term (default: off)")
    parser.add_argument("--gamma-kind", choices=("power", "rationalA",
                                                 "rationalB"), default=None,
                        help="damping family (default: power)")
    parser.add_argument("--jobs", type=int, default=None,
                        help="worker threads for sweeps (default: 1)")
    return parser


def build_specs(merged: dict):
    """Turn a merged option dict into specs, an out dir and a job count."""
    merged = dict(merged)
    out = merged.pop("out", None) or "out"
    jobs = merged.pop("jobs", None) or 1
    eps_kind = merged.pop("eps_kind", None)
    if eps_kind is not None:
        if eps_kind not in ("power", "zero"):
            raise ValueError(f"eps.kind must be power or zero, got {eps_kind!r}")
        if eps_kind == "zero":
            merged["ablation"] = True

    integ = {}
    for name in ("rtol", "atol", "h_init", "h_min", "h_max", "max_steps",
                 "safety"):
        if merged.get(name) is not None:
            integ[name] = merged.pop(name)
        else:
            merged.pop(name, None)
    settings = IntegratorSettings(**integ)

    r_values = merged.pop("r", None)
    if r_values is None:
        r_values = [1.1]
    elif isinstance(r_values, str):
        r_values = _float_list(r_values)
    elif isinstance(r_values, float):
        r_values = [r_values]
    if not r_values:
        raise ValueError("need at least one r value")

    scenario = merged.pop("problem", None) or "toy"
    fields = {k: v for k, v in merged.items() if v is not None}
    if fields.pop("ablation", None):
        fields["ablation"] = True
    specs = [ExperimentSpec(scenario=scenario, r=r, settings=settings,
                            **fields)
             for r in r_values]
    return specs, out, jobs


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)

    try:
        merged = parse_config(args.config) if args.config else {}
    except (OSError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1

    for dest in ("out", "problem", "m", "n", "e", "mdim", "ndim", "seed",
                 "alpha", "beta_exp", "r", "eps_c", "theta", "sigma", "t0",
                 "tf", "rtol", "atol", "samples", "ablation", "gamma_kind",
                 "jobs"):
        value = getattr(args, dest)
        if value is not None:
            merged[dest] = value

    try:
        specs, out, jobs = build_specs(merged)
    except (TypeError, ValueError) as err:
        print(f"invalid configuration: {err}", file=sys.stderr)
        return 1

    try:
        if len(specs) == 1:
            reports = [run_experiment(specs[0], out)]
        else:
            reports = run_sweep(specs, out, jobs=jobs)
    except (ValueError, RuntimeError) as err:
        print(f"run failed during setup: {err}", file=sys.stderr)
        return 1

    code = 0
    for rep in reports:
        tag = (f"r={rep.spec.r:g}" if len(reports) > 1 else rep.spec.scenario)
        if rep.status == "OK":
            gap = rep.final["lag_gap"]
            feas = rep.final["feas"]
            print(f"{tag}: OK in {rep.runtime_seconds:.2f}s "
                  f"({rep.naccept} steps; final lag_gap {gap:.3e}, "
                  f"feas {feas:.3e}) -> {rep.out_dir}")
        else:
            print(f"{tag}: FAILED, integration aborted at t = "
                  f"{rep.abort_time!r} -> {rep.out_dir}", file=sys.stderr)
            code = 2
    return code
