"""Experiment scenarios, run orchestration and result tables.

Two scenarios are built in.  The toy problem minimizes (m x1 + n x2 + e x3)^2
subject to m x1 - n x2 + e x3 = 0; its solution set is a line through the
origin and the least-norm solution is exactly zero, which makes strong
convergence directly observable.  The random QP draws a Gaussian objective
and constraints from the package's own deterministic generator so that a
seed reproduces the identical problem on any platform.

``run_experiment`` integrates the flow, computes per-sample metrics, fits
log-log rates, audits the energy decay certificate and writes four files
into the output directory:

* trajectory.csv: t plus the flat state (x, lam, v) per sample row
* metrics.csv: the fixed diagnostic schema (see analysis.METRIC_COLUMNS)
* conditions.txt: the schedule parameter audit
* report.txt: human-readable summary (config echo, engine, timings, fits)

CSV cells are written with repr(float) so values round-trip exactly; reruns
of the same spec produce byte-identical CSVs.  Failed integrations still
produce report.txt and conditions.txt, flagged FAILED with the abort time,
and never leave partially written files (writes go to a temp name followed
by an atomic rename).
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .analysis import (
    METRIC_COLUMNS,
    DecayAudit,
    RateFit,
    audit_decay_inequality,
    compute_metrics,
    fit_rate,
)
from .dynamics import DynamicsConfig, flat_field
from .fastpath import can_fast_path, integrate_fast, warm_up
from .integrator import IntegrationError, IntegratorSettings, integrate
from .problem import (
    ProblemInstance,
    QuadraticObjective,
    SaddlePoint,
    kkt_saddle_point,
    minimal_norm_multiplier,
    minimal_norm_solution,
)
from .rng import SplitMix64
from .schedule import (
    CoefficientSchedule,
    ConditionReport,
    DampingFamily,
    ScalingFamily,
    TikhonovFamily,
    audit_conditions,
)

__all__ = [
    "ProblemReferences",
    "ExperimentSpec",
    "RunReport",
    "build_toy",
    "build_random_qp",
    "run_experiment",
    "run_sweep",
]

_FIT_COLUMNS = ("lag_gap", "feas", "dist_min_norm", "scaled_speed")


@dataclass
class ProblemReferences:
    """Solution anchors attached to a built problem."""

    saddle: SaddlePoint
    minimal: SaddlePoint
    f_star: float
    multiplier_residual: float = 0.0
    used_seed: int | None = None
    resamples: int = 0


def build_toy(m: float, n: float, e: float, sigma: float):
    """Scalar-parameterized 3-variable problem with least-norm solution 0.

    Objective (m x1 + n x2 + e x3)^2, constraint m x1 - n x2 + e x3 = 0.
    Every coefficient must be nonzero, otherwise the solution line and its
    least-norm geometry degenerate.
    """
    if m == 0.0 or n == 0.0 or e == 0.0:
        raise ValueError("toy coefficients m, n, e must all be nonzero")
    u = np.array([float(m), float(n), float(e)])
    obj = QuadraticObjective(2.0 * np.outer(u, u), np.zeros(3))
    A = np.array([[float(m), -float(n), float(e)]])
    p = ProblemInstance(obj, A, np.zeros(1), sigma)
    origin = SaddlePoint(np.zeros(3), np.zeros(1))
    refs = ProblemReferences(saddle=origin, minimal=origin, f_star=0.0)
    return p, refs


def build_random_qp(mdim: int, ndim: int, seed: int, sigma: float = 1.0):
    """Gaussian QP: min 1/2 x^T M x + q^T x  s.t.  A x = b.

    Stream layout from SplitMix64(seed), in order: q (ndim normals), A
    (mdim*ndim normals, row-major), b (mdim uniforms on [0,1)), R (ndim^2
    normals, row-major) with M = R^T R symmetrized.  If A comes out rank
    deficient the draw repeats with seed+1, seed+2, ... and the report
    records how many resamples happened.
    """
    if not (0 < mdim < ndim):
        raise ValueError("need 0 < mdim < ndim for an underdetermined QP")
    resamples = 0
    used = int(seed)
    while True:
        g = SplitMix64(used)
        q = np.array(g.normals(ndim))
        A = np.array(g.normals(mdim * ndim)).reshape(mdim, ndim)
        b = np.array(g.uniforms(mdim))
        if np.linalg.matrix_rank(A) == mdim:
            break
        resamples += 1
        used += 1
        if resamples > 100:
            raise RuntimeError("could not draw a full-rank constraint matrix")
    R = np.array(g.normals(ndim * ndim)).reshape(ndim, ndim)
    G = R.T @ R
    M = 0.5 * (G + G.T)
    obj = QuadraticObjective(M, q)
    p = ProblemInstance(obj, A, b, sigma)
    saddle = kkt_saddle_point(obj, A, b)
    x_hat = minimal_norm_solution(p, saddle)
    lam_hat, resid = minimal_norm_multiplier(p, x_hat)
    refs = ProblemReferences(
        saddle=saddle,
        minimal=SaddlePoint(x_hat, lam_hat),
        f_star=obj.value(saddle.primal),
        multiplier_residual=resid,
        used_seed=used,
        resamples=resamples,
    )
    return p, refs


@dataclass
class ExperimentSpec:
    """Complete, validated description of one run."""

    scenario: str
    m: float = 1.0
    n: float = 1.0
    e: float = 1.0
    mdim: int = 30
    ndim: int = 50
    seed: int = 1
    gamma_kind: str = "power"
    alpha: float = 13.0
    beta_exp: float = 1.0
    eps_c: float | None = None
    r: float = 1.1
    theta: float | None = None
    sigma: float = 1.0
    t0: float = 1.0
    tf: float = 1000.0
    ablation: bool = False
    settings: IntegratorSettings = field(default_factory=IntegratorSettings)
    samples: int = 400

    def __post_init__(self):
        if self.scenario not in ("toy", "qp"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.scenario == "toy" and (self.m == 0.0 or self.n == 0.0
                                       or self.e == 0.0):
            raise ValueError("toy coefficients m, n, e must all be nonzero")
        if self.scenario == "qp" and not (0 < self.mdim < self.ndim):
            raise ValueError("need 0 < mdim < ndim")
        if not self.tf > self.t0:
            raise ValueError("tf must exceed t0")
        if self.samples < 2:
            raise ValueError("need at least 2 samples")
        if self.gamma_kind not in ("power", "rationalA", "rationalB"):
            raise ValueError(f"unknown damping kind {self.gamma_kind!r}")
        if self.theta is not None and not (self.theta > 0.0):
            raise ValueError("theta must be positive")
        if self.eps_c is not None and self.eps_c < 0.0:
            raise ValueError("eps_c must be nonnegative")

    def effective_eps_c(self) -> float:
        """Regularization scale: 3 for the toy scenario, 1 for the QP."""
        if self.eps_c is not None:
            return self.eps_c
        return 3.0 if self.scenario == "toy" else 1.0

    def effective_theta(self) -> float:
        """Coupling weight at the damping-condition boundary.

        1/(alpha-1) for power and rationalB damping; 1/(2 alpha - 2) for
        rationalA, whose t gamma(t) approaches 2 alpha instead of alpha.
        """
        if self.theta is not None:
            return self.theta
        if self.gamma_kind == "rationalA":
            return 1.0 / (2.0 * self.alpha - 2.0)
        return 1.0 / (self.alpha - 1.0)

    def build_schedule(self) -> CoefficientSchedule:
        return CoefficientSchedule(
            theta=self.effective_theta(),
            gamma=DampingFamily(self.gamma_kind, self.alpha),
            beta_fn=ScalingFamily("power", self.beta_exp),
            eps_fn=TikhonovFamily("power", self.effective_eps_c(), self.r),
            t0=self.t0,
        )


@dataclass
class RunReport:
    """Everything a run produced, in memory plus file paths."""

    spec: ExperimentSpec
    out_dir: str
    status: str
    engine: str
    abort_time: float | None
    runtime_seconds: float
    naccept: int | None
    nreject: int | None
    condition_report: ConditionReport
    references: ProblemReferences
    metrics: dict | None
    fits: dict
    decay: DecayAudit | None
    decay_skipped: str | None
    final: dict | None


def _initial_state(spec: ExperimentSpec, p: ProblemInstance) -> np.ndarray:
    if spec.scenario == "toy":
        return np.array([1.0, 1.0, -1.0, 1.0, -1.0, -1.0, 1.0])
    return np.ones(2 * p.dim_primal + p.dim_dual)


def _write_atomic(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _csv_text(header, columns) -> str:
    lines = [",".join(header)]
    ncols = len(columns)
    nrows = len(columns[0])
    for i in range(nrows):
        lines.append(",".join(repr(float(columns[j][i])) for j in range(ncols)))
    return "\n".join(lines) + "\n"


def _format_fit(fit: RateFit | None) -> str:
    if fit is None:
        return "not fitted (too few positive samples in window)"
    return (f"slope {fit.slope:+.4f}, r^2 {fit.r_squared:.6f}, "
            f"{fit.n_points} points in [{fit.window[0]:g}, {fit.window[1]:g}]")


def _report_text(rep: RunReport) -> str:
    spec = rep.spec
    refs = rep.references
    lines = [
        f"status: {rep.status}",
        f"scenario: {spec.scenario}",
        f"engine: {rep.engine} (wall time excludes one-time kernel compilation)",
        f"integration_wall_seconds: {rep.runtime_seconds:.3f}",
    ]
    if rep.abort_time is not None:
        lines.append(f"aborted_at_t: {rep.abort_time!r}")
    if rep.naccept is not None:
        lines.append(f"steps: {rep.naccept} accepted, {rep.nreject} rejected")
    lines.append("")
    lines.append("config:")
    for f in fields(spec):
        if f.name == "settings":
            s = spec.settings
            lines.append(f"  integrator: rtol={s.rtol!r} atol={s.atol!r} "
                         f"h_min={s.h_min!r} max_steps={s.max_steps} "
                         f"safety={s.safety!r}")
        else:
            lines.append(f"  {f.name} = {getattr(spec, f.name)!r}")
    lines.append(f"  theta (effective) = {spec.effective_theta()!r}")
    lines.append(f"  eps_c (effective) = {spec.effective_eps_c()!r}")
    lines.append("")
    lines.append("anchors:")
    lines.append(f"  saddle multiplier lam* = {refs.saddle.dual.tolist()!r} "
                 "(KKT solution; used for lag_gap, drift, G, Gtilde)")
    lines.append(f"  least-norm x_hat = {refs.minimal.primal.tolist()!r}")
    lines.append(f"  least-norm multiplier lam_hat = {refs.minimal.dual.tolist()!r} "
                 f"(residual {refs.multiplier_residual!r}; used for dist_min_norm)")
    if refs.used_seed is not None:
        lines.append(f"  rng seed used = {refs.used_seed} "
                     f"({refs.resamples} resamples)")
    lines.append("")
    if rep.fits:
        lines.append("rate fits (log-log):")
        for name in _FIT_COLUMNS:
            lines.append(f"  {name}: {_format_fit(rep.fits.get(name))}")
        lines.append("")
    if rep.decay is not None:
        lines.append(f"decay certificate: max normalized violation "
                     f"{rep.decay.max_violation!r} at t = {rep.decay.t_at_max!r}")
    elif rep.decay_skipped:
        lines.append(f"decay certificate: skipped ({rep.decay_skipped})")
    if rep.final:
        lines.append("")
        lines.append("final sample:")
        for k, v in rep.final.items():
            lines.append(f"  {k} = {v!r}")
    return "\n".join(lines) + "\n"


def run_experiment(spec: ExperimentSpec, out_dir) -> RunReport:
    """Integrate one spec and write its four result files into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if spec.scenario == "toy":
        p, refs = build_toy(spec.m, spec.n, spec.e, spec.sigma)
    else:
        p, refs = build_random_qp(spec.mdim, spec.ndim, spec.seed, spec.sigma)

    sched = spec.build_schedule()
    cfg = DynamicsConfig(p, sched, tikhonov_enabled=not spec.ablation)
    cond = audit_conditions(sched)
    grid = np.geomspace(spec.t0, spec.tf, spec.samples)
    y0 = _initial_state(spec, p)

    use_fast = can_fast_path(cfg)
    engine = "compiled" if use_fast else "generic"
    if use_fast:
        warm_up()

    abort_time = None
    status = "OK"
    naccept = nreject = None
    traj = None
    t_start = time.perf_counter()
    try:
        if use_fast:
            traj = integrate_fast(cfg, spec.t0, spec.tf, y0, spec.settings,
                                  samples=grid)
        else:
            traj = integrate(flat_field(cfg), spec.t0, spec.tf, y0,
                             spec.settings, samples=grid)
        naccept, nreject = traj.naccept, traj.nreject
    except IntegrationError as err:
        status = "FAILED"
        abort_time = err.t
    runtime = time.perf_counter() - t_start

    metrics = None
    fits = {}
    decay = None
    decay_skipped = None
    final = None
    if status == "OK":
        metrics = compute_metrics(cfg, traj.ts, traj.ys, refs.saddle,
                                  refs.minimal)
        for name in _FIT_COLUMNS:
            try:
                fits[name] = fit_rate(metrics["t"], metrics[name])
            except ValueError:
                fits[name] = None
        if spec.ablation:
            decay_skipped = "ablation run, the certificate assumes the regularizer"
        elif not cond.all_pass:
            decay_skipped = "schedule fails the parameter conditions"
        else:
            decay = audit_decay_inequality(cfg, traj.ts, traj.ys, refs.saddle)
        final = {name: float(metrics[name][-1]) for name in METRIC_COLUMNS
                 if name != "t"}

    rep = RunReport(
        spec=spec, out_dir=str(out), status=status, engine=engine,
        abort_time=abort_time, runtime_seconds=runtime,
        naccept=naccept, nreject=nreject, condition_report=cond,
        references=refs, metrics=metrics, fits=fits, decay=decay,
        decay_skipped=decay_skipped, final=final,
    )

    _write_atomic(out / "conditions.txt", cond.summary() + "\n")
    _write_atomic(out / "report.txt", _report_text(rep))
    if status == "OK":
        n, m = p.dim_primal, p.dim_dual
        traj_header = (["t"]
                       + [f"x{i + 1}" for i in range(n)]
                       + [f"lam{j + 1}" for j in range(m)]
                       + [f"v{i + 1}" for i in range(n)])
        traj_cols = [traj.ts] + [traj.ys[:, k] for k in range(2 * n + m)]
        _write_atomic(out / "trajectory.csv", _csv_text(traj_header, traj_cols))
        _write_atomic(out / "metrics.csv",
                      _csv_text(list(METRIC_COLUMNS),
                                [metrics[c] for c in METRIC_COLUMNS]))
    return rep


def run_sweep(specs, out_root, jobs: int = 1):
    """Run independent specs into numbered subdirectories of out_root.

    With jobs > 1 the runs execute on worker threads; the compiled kernel
    releases the interpreter lock, so sweep members genuinely overlap.
    Reports come back in spec order.
    """
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    dirs = [out_root / f"run_{i:03d}" for i in range(len(specs))]
    if jobs <= 1:
        return [run_experiment(s, d) for s, d in zip(specs, dirs)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_experiment, s, d)
                   for s, d in zip(specs, dirs)]
        return [f.result() for f in futures]
