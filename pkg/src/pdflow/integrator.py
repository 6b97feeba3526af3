"""Adaptive explicit Runge-Kutta 3(2) integrator.

Implements the Bogacki-Shampine pair: three stages advance the solution at
third order, a fourth stage (reused as the first stage of the next step,
"first same as last") yields an embedded second-order error estimate.  Step
acceptance uses a scaled RMS norm

    errnorm = sqrt(mean((err_i / scale_i)^2)),
    scale_i = atol + rtol * max(|y_i|, |y_new_i|)

with a step accepted when errnorm <= 1.  The next step size is

    h * clamp(safety * errnorm^(-1/3), 0.2, 5.0)

(growth capped at 5, shrink at 0.2; an exactly zero estimate grows by the
maximum factor).  Rejected steps shrink by the same rule but never grow.
Output at requested sample times comes from cubic Hermite interpolation over
each accepted step, using the first-same-as-last stages as endpoint slopes;
sample times falling exactly on a step endpoint return the stored state with
no interpolation error.  The sampling machinery never alters step selection,
so trajectories are bit-for-bit identical across different sample grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "IntegratorSettings",
    "Trajectory",
    "IntegrationError",
    "StepUnderflow",
    "StepBudgetExceeded",
    "NonFiniteField",
    "integrate",
    "fixed_step_order_probe",
]

_ORDER_EXP = -1.0 / 3.0
_FAC_MIN = 0.2
_FAC_MAX = 5.0


class IntegrationError(RuntimeError):
    """Base class for integration failures; carries the time of failure."""

    def __init__(self, t: float, message: str):
        super().__init__(f"{message} (t = {t!r})")
        self.t = t


class StepUnderflow(IntegrationError):
    """The controller pushed the step size below h_min."""

    def __init__(self, t: float):
        super().__init__(t, "step size underflow, the problem looks stiff here")


class StepBudgetExceeded(IntegrationError):
    """The attempted-step budget ran out before reaching the end time."""

    def __init__(self, t: float):
        super().__init__(t, "step budget exhausted")


class NonFiniteField(IntegrationError):
    """The vector field or state produced a NaN or infinity."""

    def __init__(self, t: float):
        super().__init__(t, "non-finite value in state or field")


@dataclass
class IntegratorSettings:
    rtol: float = 1e-6
    atol: float = 1e-9
    h_init: float | None = None
    h_min: float = 1e-12
    h_max: float | None = None
    max_steps: int = 10_000_000
    safety: float = 0.9

    def __post_init__(self):
        if not (self.rtol > 0.0):
            raise ValueError("rtol must be positive")
        if self.atol < 0.0:
            raise ValueError("atol must be nonnegative")
        if self.h_init is not None and not (self.h_init > 0.0):
            raise ValueError("h_init must be positive when given")
        if not (self.h_min > 0.0):
            raise ValueError("h_min must be positive")
        if self.h_max is not None and not (self.h_max > 0.0):
            raise ValueError("h_max must be positive when given")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if not (0.0 < self.safety < 1.0):
            raise ValueError("safety must lie in (0, 1)")


@dataclass
class Trajectory:
    """Sampled solution plus step statistics."""

    ts: np.ndarray
    ys: np.ndarray
    naccept: int
    nreject: int


def _validate_samples(samples, t0, tf):
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1 or samples.size == 0:
        raise ValueError("samples must be a nonempty one dimensional array")
    if np.any(np.diff(samples) <= 0.0):
        raise ValueError("samples must be strictly increasing")
    if samples[0] < t0 or samples[-1] > tf:
        raise ValueError("samples must lie within [t0, tf]")
    return samples


def _hermite(y, k_left, y_new, k_right, h, s):
    # cubic Hermite basis on [0, 1] with endpoint values and slopes
    s2 = s * s
    s3 = s2 * s
    h00 = 2.0 * s3 - 3.0 * s2 + 1.0
    h10 = s3 - 2.0 * s2 + s
    h01 = -2.0 * s3 + 3.0 * s2
    h11 = s3 - s2
    return h00 * y + (h10 * h) * k_left + h01 * y_new + (h11 * h) * k_right


def integrate(field, t0, tf, y0, settings=None, samples=None) -> Trajectory:
    """Integrate y' = field(t, y) from t0 to tf.

    field takes (t, y) and returns dy as an array of the same shape.  When
    samples is given the trajectory is evaluated exactly at those strictly
    increasing times inside [t0, tf]; otherwise every accepted step point is
    recorded.  Raises StepUnderflow, StepBudgetExceeded or NonFiniteField on
    failure, each carrying the time reached.
    """
    if settings is None:
        settings = IntegratorSettings()
    t0 = float(t0)
    tf = float(tf)
    if not tf > t0:
        raise ValueError("tf must exceed t0")
    y = np.asarray(y0, dtype=float).copy()
    if y.ndim != 1:
        raise ValueError("y0 must be one dimensional")
    if not np.all(np.isfinite(y)):
        raise ValueError("y0 must be finite")

    if samples is not None:
        samples = _validate_samples(samples, t0, tf)
        nsamp = samples.size
        out = np.empty((nsamp, y.size))
        isamp = 0
        while isamp < nsamp and samples[isamp] == t0:
            out[isamp] = y
            isamp += 1
        rec_ts = None
    else:
        rec_ts = [t0]
        rec_ys = [y.copy()]

    h_cap = tf - t0 if settings.h_max is None else min(settings.h_max, tf - t0)

    t = t0
    k1 = np.asarray(field(t, y), dtype=float)
    if not np.all(np.isfinite(k1)):
        raise NonFiniteField(t)

    if settings.h_init is not None:
        h = settings.h_init
    else:
        h = 1e-2 * (tf - t0) / max(1.0, float(np.linalg.norm(k1)))
    h = min(h, h_cap)

    rtol, atol, safety = settings.rtol, settings.atol, settings.safety
    h_min, max_steps = settings.h_min, settings.max_steps
    naccept = 0
    nreject = 0
    attempts = 0

    while t < tf:
        if h < h_min:
            raise StepUnderflow(t)
        attempts += 1
        if attempts > max_steps:
            raise StepBudgetExceeded(t)

        last = h >= tf - t
        if last:
            h = tf - t
        t_new = tf if last else t + h

        k2 = np.asarray(field(t + 0.5 * h, y + (0.5 * h) * k1), dtype=float)
        k3 = np.asarray(field(t + 0.75 * h, y + (0.75 * h) * k2), dtype=float)
        y_new = y + h * ((2.0 / 9.0) * k1 + (1.0 / 3.0) * k2 + (4.0 / 9.0) * k3)
        k4 = np.asarray(field(t_new, y_new), dtype=float)
        err = h * ((-5.0 / 72.0) * k1 + (1.0 / 12.0) * k2
                   + (1.0 / 9.0) * k3 + (-1.0 / 8.0) * k4)

        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            errnorm = float(np.sqrt(np.mean((err / scale) ** 2)))

        if not math.isfinite(errnorm):
            nreject += 1
            h *= _FAC_MIN
            continue

        if errnorm <= 1.0:
            if samples is not None:
                while isamp < nsamp and samples[isamp] <= t_new:
                    st = samples[isamp]
                    if st == t:
                        out[isamp] = y
                    elif st == t_new:
                        out[isamp] = y_new
                    else:
                        out[isamp] = _hermite(y, k1, y_new, k4,
                                              t_new - t, (st - t) / (t_new - t))
                    isamp += 1
            else:
                rec_ts.append(t_new)
                rec_ys.append(y_new.copy())
            t = t_new
            y = y_new
            k1 = k4
            naccept += 1
            if errnorm == 0.0:
                fac = _FAC_MAX
            else:
                fac = min(_FAC_MAX, max(_FAC_MIN, safety * errnorm ** _ORDER_EXP))
            h = min(fac * h, h_cap)
        else:
            nreject += 1
            h *= min(1.0, max(_FAC_MIN, safety * errnorm ** _ORDER_EXP))

    if samples is not None:
        ts = samples
        ys = out
    else:
        ts = np.asarray(rec_ts)
        ys = np.asarray(rec_ys)
    return Trajectory(ts=ts, ys=ys, naccept=naccept, nreject=nreject)


def fixed_step_order_probe(field, t0, tf, y0, h, reference) -> float:
    """Terminal error of the third-order solution at a fixed step size.

    Runs the advancing formula with constant h (no error control), which
    makes the global error scale as h^3 and so exposes the convergence
    order when called over a range of step sizes.  (tf - t0) must be an
    integer multiple of h.  Returns ||y(tf) - reference||_2.
    """
    t0 = float(t0)
    tf = float(tf)
    span = tf - t0
    steps = span / h
    n = round(steps)
    if n < 1 or abs(steps - n) > 1e-9:
        raise ValueError("(tf - t0) must be an integer multiple of h")
    y = np.asarray(y0, dtype=float).copy()
    t = t0
    k1 = np.asarray(field(t, y), dtype=float)
    for i in range(n):
        k2 = np.asarray(field(t + 0.5 * h, y + (0.5 * h) * k1), dtype=float)
        k3 = np.asarray(field(t + 0.75 * h, y + (0.75 * h) * k2), dtype=float)
        y = y + h * ((2.0 / 9.0) * k1 + (1.0 / 3.0) * k2 + (4.0 / 9.0) * k3)
        t = t0 + (i + 1) * h
        k1 = np.asarray(field(t, y), dtype=float)
    return float(np.linalg.norm(y - np.asarray(reference, dtype=float)))
