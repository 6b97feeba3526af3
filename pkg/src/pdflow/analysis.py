"""Lyapunov evaluation, decay certification, metrics and rate fitting.

The three Lyapunov functions share the same ingredients (augmented
Lagrangian gap at a frozen multiplier, a weighted distance to an anchor
point, a mixed position-velocity term, a multiplier distance) but differ in
their time weights:

* ``lyapunov_G``     grows like t^2 along the flow and certifies decay of
  the gap once divided by theta t^2 beta;
* ``lyapunov_Gtilde`` is G rescaled by 1/t^2, the quantity that the decay
  inequality bounds directly;
* ``lyapunov_Ghat``  is Gtilde anchored at the least-norm primal solution
  and its multiplier, used for the strong-convergence diagnostics.

``audit_decay_inequality`` checks, sample by sample,

    t^2 Gtilde(t)  <=  t0^2 Gtilde(t0) + (||x*||^2 / (2 theta)) I(t),
    I(t) = integral of s beta(s) eps(s) from t0 to t,

reporting the largest violation normalized as (lhs - rhs) / (1 + rhs).  The
integral uses the closed form for power-law schedules and adaptive Simpson
quadrature otherwise.  The inequality is only meaningful when the schedule
passes its parameter audit, so a failing audit raises instead of returning
numbers that certify nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DynamicsConfig, SystemState, unpack
from .problem import (
    SaddlePoint,
    augmented_lagrangian,
)
from .schedule import audit_conditions, eval_schedule

__all__ = [
    "lyapunov_G",
    "lyapunov_Gtilde",
    "lyapunov_Ghat",
    "DecayAudit",
    "audit_decay_inequality",
    "compute_metrics",
    "RateFit",
    "fit_rate",
    "tikhonov_point",
]

METRIC_COLUMNS = (
    "t", "lag_gap", "f_gap_abs", "feas", "grad_err",
    "dist_min_norm", "scaled_speed", "drift", "G", "Gtilde",
)


def _gap(cfg, x, lam_anchor, x_anchor):
    return (augmented_lagrangian(cfg.problem, x, lam_anchor)
            - augmented_lagrangian(cfg.problem, x_anchor, lam_anchor))


def lyapunov_G(cfg: DynamicsConfig, t: float, state: SystemState,
               saddle: SaddlePoint) -> float:
    """Energy theta t^2 beta (gap + eps/2 ||x||^2) + distance terms.

    The mixed term uses eta = 1 / sqrt(theta); the anchor weight is
    c(t) = t gamma - (1 + theta) / theta, nonnegative whenever the
    parameter conditions hold.
    """
    theta = cfg.schedule.theta
    _, _, beta, _, eps, _ = eval_schedule(cfg.schedule, t)
    gamma = cfg.schedule.gamma(t)
    x, lam, v = state.x, state.lam, state.v
    dx = x - saddle.primal
    dlam = lam - saddle.dual
    gap = _gap(cfg, x, saddle.dual, saddle.primal)
    c_t = t * gamma - (1.0 + theta) / theta
    eta = 1.0 / math.sqrt(theta)
    mixed = eta * dx + math.sqrt(theta) * t * v
    return (theta * t * t * beta * (gap + 0.5 * eps * float(x @ x))
            + 0.5 * c_t * float(dx @ dx)
            + 0.5 * float(mixed @ mixed)
            + 0.5 * float(dlam @ dlam))


def lyapunov_Gtilde(cfg: DynamicsConfig, t: float, state: SystemState,
                    saddle: SaddlePoint) -> float:
    """The 1/t^2 rescaling of the energy; decays under the conditions."""
    theta = cfg.schedule.theta
    _, _, beta, _, eps, _ = eval_schedule(cfg.schedule, t)
    gamma = cfg.schedule.gamma(t)
    x, lam, v = state.x, state.lam, state.v
    dx = x - saddle.primal
    dlam = lam - saddle.dual
    gap = _gap(cfg, x, saddle.dual, saddle.primal)
    d_t = (theta * t * gamma - theta - 1.0) / (theta * theta * t * t)
    mixed = dx / (theta * t) + v
    return (beta * (gap + 0.5 * eps * float(x @ x))
            + 0.5 * float(mixed @ mixed)
            + float(dlam @ dlam) / (2.0 * theta * t * t)
            + 0.5 * d_t * float(dx @ dx))


def lyapunov_Ghat(cfg: DynamicsConfig, t: float, state: SystemState,
                  minimal: SaddlePoint) -> float:
    """Gtilde anchored at the least-norm solution pair.

    The regularization term is recentred as well: eps/2 (||x||^2 -
    ||x_hat||^2) replaces eps/2 ||x||^2, so the value vanishes at the
    anchor.
    """
    theta = cfg.schedule.theta
    _, _, beta, _, eps, _ = eval_schedule(cfg.schedule, t)
    gamma = cfg.schedule.gamma(t)
    x, lam, v = state.x, state.lam, state.v
    x_hat, lam_hat = minimal.primal, minimal.dual
    dx = x - x_hat
    dlam = lam - lam_hat
    gap = _gap(cfg, x, lam_hat, x_hat)
    d_t = (theta * t * gamma - theta - 1.0) / (theta * theta * t * t)
    mixed = dx / (theta * t) + v
    return (beta * (gap + 0.5 * eps * (float(x @ x) - float(x_hat @ x_hat)))
            + 0.5 * float(mixed @ mixed)
            + 0.5 * d_t * float(dx @ dx)
            + float(dlam @ dlam) / (2.0 * theta * t * t))


def _adaptive_simpson(f, a, b, tol):
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        if depth > 48 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
                + recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1))

    return recurse(a, b, fa, fm, fb, whole, tol, 0)


def _weighted_eps_integral(sched, ts):
    """Cumulative integral of s beta(s) eps(s) from ts[0] to each sample."""
    t0 = float(ts[0])
    if (sched.beta_fn.kind in ("power", "constant")
            and sched.eps_fn.kind in ("power", "zero")):
        if sched.eps_fn.kind == "zero" or sched.eps_fn.c == 0.0:
            return np.zeros_like(ts)
        c = sched.eps_fn.c
        e = 1.0 + sched.beta_fn.beta_exp - sched.eps_fn.r
        if e == -1.0:
            return c * np.log(ts / t0)
        return c * (ts ** (e + 1.0) - t0 ** (e + 1.0)) / (e + 1.0)

    def f(s):
        _, _, beta, _, eps, _ = eval_schedule(sched, s)
        return s * beta * eps

    out = np.zeros(len(ts))
    acc = 0.0
    for i in range(1, len(ts)):
        a, b = float(ts[i - 1]), float(ts[i])
        if b > a:
            seg = _adaptive_simpson(f, a, b, 1e-10 * max(1.0, abs(acc)))
            acc += seg
        out[i] = acc
    return out


@dataclass
class DecayAudit:
    """Samplewise certificate data for the energy decay inequality."""

    ts: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    max_violation: float
    t_at_max: float


def audit_decay_inequality(cfg: DynamicsConfig, ts, ys,
                           saddle: SaddlePoint) -> DecayAudit:
    """Certify t^2 Gtilde(t) against its theoretical bound along a run.

    ts are sample times (first entry is the reference time), ys the matching
    flat states.  Raises ValueError when the schedule fails the parameter
    audit, because the bound is only proved under those conditions.
    """
    report = audit_conditions(cfg.schedule)
    if not report.all_pass:
        raise ValueError(
            "schedule fails the parameter conditions; decay bound does not apply:\n"
            + report.summary()
        )
    ts = np.asarray(ts, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if ys.ndim != 2 or ys.shape[0] != ts.shape[0]:
        raise ValueError("ys must have one row per sample time")
    n, m = cfg.problem.dim_primal, cfg.problem.dim_dual

    theta = cfg.schedule.theta
    lhs = np.empty(len(ts))
    for i, t in enumerate(ts):
        st = unpack(ys[i], n, m)
        lhs[i] = t * t * lyapunov_Gtilde(cfg, float(t), st, saddle)

    weight = float(saddle.primal @ saddle.primal) / (2.0 * theta)
    rhs = lhs[0] + weight * _weighted_eps_integral(cfg.schedule, ts)

    viol = (lhs - rhs) / (1.0 + rhs)
    worst = int(np.argmax(viol))
    return DecayAudit(ts=ts, lhs=lhs, rhs=rhs,
                      max_violation=float(viol[worst]),
                      t_at_max=float(ts[worst]))


def compute_metrics(cfg: DynamicsConfig, ts, ys, saddle: SaddlePoint,
                    minimal: SaddlePoint) -> dict:
    """Per-sample diagnostic columns for a trajectory.

    Returns a dict with keys in METRIC_COLUMNS order:

    * lag_gap: augmented Lagrangian gap L(x, lam*) - L(x*, lam*)
    * f_gap_abs: |f(x) - f(x*)|
    * feas: ||A x - b||
    * grad_err: ||grad f(x) + A^T lam||, stationarity of the plain
      Lagrangian at the running multiplier
    * dist_min_norm: ||x - x_hat|| against the least-norm solution
    * scaled_speed: t ||v||
    * drift: ||lam - lam*||
    * G, Gtilde: the two Lyapunov values anchored at the saddle
    """
    ts = np.asarray(ts, dtype=float)
    ys = np.asarray(ys, dtype=float)
    p = cfg.problem
    n, m = p.dim_primal, p.dim_dual
    N = len(ts)
    cols = {name: np.empty(N) for name in METRIC_COLUMNS}
    f_star = p.objective.value(saddle.primal)
    A, b = p.constraint_matrix, p.constraint_rhs
    for i in range(N):
        t = float(ts[i])
        st = unpack(ys[i], n, m)
        x, lam, v = st.x, st.lam, st.v
        cols["t"][i] = t
        cols["lag_gap"][i] = _gap(cfg, x, saddle.dual, saddle.primal)
        cols["f_gap_abs"][i] = abs(p.objective.value(x) - f_star)
        cols["feas"][i] = float(np.linalg.norm(A @ x - b))
        cols["grad_err"][i] = float(np.linalg.norm(p.objective.grad(x) + A.T @ lam))
        cols["dist_min_norm"][i] = float(np.linalg.norm(x - minimal.primal))
        cols["scaled_speed"][i] = t * float(np.linalg.norm(v))
        cols["drift"][i] = float(np.linalg.norm(lam - saddle.dual))
        cols["G"][i] = lyapunov_G(cfg, t, st, saddle)
        cols["Gtilde"][i] = lyapunov_Gtilde(cfg, t, st, saddle)
    return cols


@dataclass
class RateFit:
    """Least-squares slope of log(value) against log(t)."""

    slope: float
    intercept: float
    r_squared: float
    n_points: int
    window: tuple


def fit_rate(ts, values, window=None) -> RateFit:
    """Fit value ~ exp(intercept) * t^slope over a time window.

    The default window is [50, 0.9 tf].  Nonpositive values are excluded
    (they carry no rate information on a log scale); remaining values are
    clipped below at 1e-300 to keep logs finite.  Requires at least 8
    usable points.
    """
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (50.0, 0.9 * float(ts[-1]))
    lo, hi = float(window[0]), float(window[1])
    mask = (ts >= lo) & (ts <= hi) & (values > 0.0) & np.isfinite(values)
    if int(mask.sum()) < 8:
        raise ValueError(
            f"need at least 8 positive samples in [{lo}, {hi}], have {int(mask.sum())}"
        )
    lt = np.log(ts[mask])
    lv = np.log(np.maximum(values[mask], 1e-300))
    lt_c = lt - lt.mean()
    slope = float((lt_c @ (lv - lv.mean())) / (lt_c @ lt_c))
    intercept = float(lv.mean() - slope * lt.mean())
    resid = lv - (intercept + slope * lt)
    ss_tot = float(((lv - lv.mean()) ** 2).sum())
    ss_res = float((resid ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(slope=slope, intercept=intercept,
                   r_squared=min(1.0, max(0.0, r2)),
                   n_points=int(mask.sum()), window=(lo, hi))


def tikhonov_point(p, lam, eps: float, x0=None) -> np.ndarray:
    """Minimizer of x -> L_sigma(x, lam) + eps/2 ||x||^2.

    Quadratic objectives solve the linear system
    (M + sigma A^T A + eps I) x = -q - A^T lam + sigma A^T b directly.
    Other objectives run gradient descent with step 1/(L + eps) from x0
    (or zero) until the gradient norm falls below 1e-10.
    """
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    lam = np.asarray(lam, dtype=float)
    A, b, sigma = p.constraint_matrix, p.constraint_rhs, p.penalty
    obj = p.objective
    if hasattr(obj, "hessian"):
        H = obj.hessian + sigma * (A.T @ A) + eps * np.eye(p.dim_primal)
        rhs = -obj.linear - A.T @ lam + sigma * (A.T @ b)
        return np.linalg.solve(H, rhs)
    x = np.zeros(p.dim_primal) if x0 is None else np.asarray(x0, dtype=float).copy()
    step = 1.0 / (obj.lipschitz() + sigma * p.norm_AtA() + eps)
    for _ in range(200_000):
        g = obj.grad(x) + A.T @ lam + sigma * (A.T @ (A @ x - b)) + eps * x
        gn = float(np.linalg.norm(g))
        if gn <= 1e-10:
            return x
        x = x - step * g
    raise RuntimeError(
        f"gradient descent did not reach tolerance (last gradient norm {gn:.3e})"
    )
