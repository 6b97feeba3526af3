"""Coefficient families gamma(t), beta(t), eps(t) and the admissibility audit.

The flow needs a damping coefficient gamma, a time scaling beta and a
regularization weight eps, all with analytic first derivatives.  Three
conditions tie them together:

    (damping vs scaling)    (2 theta - 1) beta(t) + theta t beta'(t) <= 0
    (damping vs tikhonov)   gamma(t) + t gamma'(t) - t beta(t) eps(t) <= 0
    (damping strength)      theta t gamma(t) - theta - 1 >= 0

and two integrability regimes classify the tail of eps:

    fast:  integral of t beta(t) eps(t) dt finite   (rate guarantees)
    slow:  integral of beta(t) eps(t) / t dt finite (minimal-norm selection)

For the built-in power families every margin and integral has a closed form;
the audit grid only supplies evidence for custom callables.  Boundary
equality counts as a pass: the conditions are non-strict.
"""

import math
from dataclasses import dataclass, field

import numpy as np

_AUDIT_GRID_POINTS = 256
_AUDIT_GRID_END = 1e6


class DampingFamily:
    """gamma(t) families: alpha/t, (2 alpha t - 1)/t^2, (1 + alpha t)/t^2."""

    KINDS = ("power", "rationalA", "rationalB", "custom")

    def __init__(self, kind, alpha=None, value=None, deriv=None):
        if kind not in self.KINDS:
            raise ValueError(f"unknown damping kind {kind!r}; choose from {self.KINDS}")
        self.kind = kind
        self.alpha = None if alpha is None else float(alpha)
        self._value = value
        self._deriv = deriv
        if kind == "custom":
            if value is None or deriv is None:
                raise ValueError("custom damping needs value and deriv callables")
        else:
            if self.alpha is None:
                raise ValueError(f"{kind} damping needs alpha")
            if kind == "power" and self.alpha <= 0:
                raise ValueError("power damping alpha/t needs alpha > 0")
            if kind == "rationalB" and self.alpha < 0:
                raise ValueError("(1 + alpha t)/t^2 damping needs alpha >= 0")

    def __call__(self, t):
        a = self.alpha
        if self.kind == "power":
            return a / t
        if self.kind == "rationalA":
            return (2.0 * a * t - 1.0) / (t * t)
        if self.kind == "rationalB":
            return (1.0 + a * t) / (t * t)
        return float(self._value(t))

    def deriv(self, t):
        a = self.alpha
        if self.kind == "power":
            return -a / (t * t)
        if self.kind == "rationalA":
            return (2.0 - 2.0 * a * t) / (t * t * t)
        if self.kind == "rationalB":
            return -(a * t + 2.0) / (t * t * t)
        return float(self._deriv(t))

    def drift(self, t):
        """gamma(t) + t gamma'(t), exact for the built-in kinds."""
        if self.kind == "power":
            return 0.0
        if self.kind == "rationalA":
            return 1.0 / (t * t)
        if self.kind == "rationalB":
            return -1.0 / (t * t)
        return self(t) + t * self.deriv(t)


class ScalingFamily:
    """beta(t) families: t^beta_exp, the constant 1, or custom callables."""

    KINDS = ("power", "constant", "custom")

    def __init__(self, kind, beta_exp=None, value=None, deriv=None):
        if kind not in self.KINDS:
            raise ValueError(f"unknown scaling kind {kind!r}; choose from {self.KINDS}")
        self.kind = kind
        self.beta_exp = 0.0 if kind == "constant" else (
            None if beta_exp is None else float(beta_exp)
        )
        self._value = value
        self._deriv = deriv
        if kind == "custom":
            if value is None or deriv is None:
                raise ValueError("custom scaling needs value and deriv callables")
        elif kind == "power":
            if self.beta_exp is None:
                raise ValueError("power scaling needs beta_exp")
            if self.beta_exp < 0:
                raise ValueError("power scaling needs beta_exp >= 0")

    def __call__(self, t):
        if self.kind == "constant":
            return 1.0
        if self.kind == "power":
            return t**self.beta_exp
        return float(self._value(t))

    def deriv(self, t):
        if self.kind == "constant":
            return 0.0
        if self.kind == "power":
            b = self.beta_exp
            return 0.0 if b == 0.0 else b * t ** (b - 1.0)
        return float(self._deriv(t))


class TikhonovFamily:
    """eps(t) families: c/t^r, identically zero, or custom callables."""

    KINDS = ("power", "zero", "custom")

    def __init__(self, kind, c=None, r=None, value=None, deriv=None):
        if kind not in self.KINDS:
            raise ValueError(f"unknown tikhonov kind {kind!r}; choose from {self.KINDS}")
        self.kind = kind
        self.c = 0.0 if kind == "zero" else (None if c is None else float(c))
        self.r = None if r is None else float(r)
        self._value = value
        self._deriv = deriv
        if kind == "custom":
            if value is None or deriv is None:
                raise ValueError("custom tikhonov needs value and deriv callables")
        elif kind == "power":
            if self.c is None or self.r is None:
                raise ValueError("power tikhonov needs c and r")
            if self.c < 0:
                raise ValueError("tikhonov coefficient c must be nonnegative")
            if self.r <= 0:
                raise ValueError("tikhonov decay rate r must be positive")

    def __call__(self, t):
        if self.kind == "zero":
            return 0.0
        if self.kind == "power":
            return self.c * t ** (-self.r)
        return float(self._value(t))

    def deriv(self, t):
        if self.kind == "zero":
            return 0.0
        if self.kind == "power":
            return -self.c * self.r * t ** (-self.r - 1.0)
        return float(self._deriv(t))


class CoefficientSchedule:
    """theta plus the (gamma, beta, eps) triple on the time domain [t0, inf)."""

    def __init__(self, theta, gamma, beta_fn, eps_fn, t0):
        if theta <= 0:
            raise ValueError("theta must be positive")
        if t0 <= 0:
            raise ValueError("t0 must be positive")
        self.theta = float(theta)
        self.gamma = gamma
        self.beta_fn = beta_fn
        self.eps_fn = eps_fn
        self.t0 = float(t0)
        self._check_domain()

    def _check_domain(self):
        # positivity of gamma on [t0, inf): exact for built-ins, sampled for custom
        g = self.gamma
        if g.kind == "rationalA":
            if 2.0 * g.alpha * self.t0 <= 1.0:
                raise ValueError(
                    f"(2 alpha t - 1)/t^2 damping nonpositive at t0={self.t0}: "
                    f"needs 2*alpha*t0 > 1"
                )
        probe = np.geomspace(self.t0, _AUDIT_GRID_END, 64)
        if g.kind == "custom" and any(g(t) <= 0 for t in probe):
            raise ValueError("custom damping must be positive on [t0, inf)")
        if self.beta_fn.kind == "custom" and any(self.beta_fn(t) <= 0 for t in probe):
            raise ValueError("custom scaling must be positive on [t0, inf)")
        if self.eps_fn.kind == "custom":
            vals = [self.eps_fn(t) for t in probe]
            if any(v < 0 for v in vals):
                raise ValueError("custom tikhonov weight must be nonnegative")
            if any(b > a * (1 + 1e-12) for a, b in zip(vals, vals[1:])):
                raise ValueError("custom tikhonov weight must be non-increasing")


def eval_schedule(s, t):
    """(gamma, gamma', beta, beta', eps, eps') at time t >= t0."""
    if t < s.t0:
        raise ValueError(f"t={t} is below the schedule domain start t0={s.t0}")
    return (
        s.gamma(t),
        s.gamma.deriv(t),
        s.beta_fn(t),
        s.beta_fn.deriv(t),
        s.eps_fn(t),
        s.eps_fn.deriv(t),
    )


@dataclass
class ConditionReport:
    """Worst-case margins of the three admissibility conditions plus the
    integrability classification of the tikhonov tail."""

    cond6_margin: float
    cond7_margin: float
    cond8_margin: float
    fast_regime: str
    slow_regime: str
    closed_form_integrals: dict = field(default_factory=dict)

    @property
    def all_pass(self):
        return (
            self.cond6_margin <= 0.0
            and self.cond7_margin <= 0.0
            and self.cond8_margin >= 0.0
        )

    def summary(self):
        verdict = lambda ok: "PASS" if ok else "FAIL"
        lines = [
            "admissibility conditions (boundary equality passes):",
            f"  scaling growth   (2t-1)b+t tb' <= 0 : margin {self.cond6_margin!r}"
            f"  [{verdict(self.cond6_margin <= 0.0)}]",
            f"  damping drift    g+tg'-t b e   <= 0 : margin {self.cond7_margin!r}"
            f"  [{verdict(self.cond7_margin <= 0.0)}]",
            f"  damping strength t t g - t - 1 >= 0 : margin {self.cond8_margin!r}"
            f"  [{verdict(self.cond8_margin >= 0.0)}]",
            f"  fast regime (integral of t b e)  : {self.fast_regime}",
            f"  slow regime (integral of b e / t): {self.slow_regime}",
        ]
        for name, val in self.closed_form_integrals.items():
            lines.append(f"  closed form {name}: {val!r}")
        return "\n".join(lines)


def _is_power_pair(s):
    return s.beta_fn.kind in ("power", "constant") and s.eps_fn.kind in ("power", "zero")


def audit_conditions(s, grid=None):
    """Worst condition margins over the audit grid, with closed-form overrides
    for the built-in families, plus the integrability tri-states."""
    if grid is None:
        grid = np.geomspace(s.t0, _AUDIT_GRID_END, _AUDIT_GRID_POINTS)
    grid = np.asarray(grid, dtype=float)
    if grid.size < 64:
        raise ValueError(f"audit grid needs at least 64 points, got {grid.size}")
    if grid.min() < s.t0:
        raise ValueError("audit grid extends below t0")
    theta = s.theta
    t_lo = float(grid.min())
    t_hi = float(grid.max())

    rows = np.array([eval_schedule(s, float(t)) for t in grid])
    g, gd, b, bd, e, _ = rows.T
    cond6 = float(np.max((2.0 * theta - 1.0) * b + theta * grid * bd))
    cond7 = float(np.max(g + grid * gd - grid * b * e))
    cond8 = float(np.min(theta * grid * g - theta - 1.0))

    # closed-form overrides keep boundary cases exact instead of grid-sampled
    if s.beta_fn.kind in ("power", "constant"):
        bexp = s.beta_fn.beta_exp
        coef = (2.0 * theta - 1.0) + theta * bexp
        if coef == 0.0:
            cond6 = 0.0
        else:
            cond6 = coef * (t_hi if coef > 0.0 else t_lo) ** bexp

    if s.gamma.kind == "power":
        # theta t gamma - theta - 1 = theta (alpha - 1) - 1, constant in t;
        # factored so theta = 1/(alpha-1) lands on exactly 0.0
        cond8 = theta * (s.gamma.alpha - 1.0) - 1.0
        if _is_power_pair(s):
            # gamma + t gamma' = 0, so the margin is -sup grid of t beta eps
            c, r = s.eps_fn.c, (0.0 if s.eps_fn.kind == "zero" else s.eps_fn.r)
            if c == 0.0:
                cond7 = 0.0
            else:
                expo = 1.0 + s.beta_fn.beta_exp - r
                cond7 = -c * (t_hi if expo < 0.0 else t_lo) ** expo
    elif s.gamma.kind == "rationalA":
        cond8 = theta * (2.0 * s.gamma.alpha - 1.0 / t_lo - 1.0) - 1.0
        if _is_power_pair(s) and s.eps_fn.kind == "power":
            expo = 1.0 + s.beta_fn.beta_exp - s.eps_fn.r
            if expo == -2.0:
                # gamma + t gamma' = 1/t^2 against  t beta eps = c/t^2:
                # the margin is (1-c)/t^2, exactly zero at c = 1
                rem = 1.0 - s.eps_fn.c
                cond7 = rem * (t_lo if rem > 0.0 else t_hi) ** -2.0 if rem != 0.0 else 0.0

    if _is_power_pair(s):
        bexp = s.beta_fn.beta_exp
        if s.eps_fn.kind == "zero" or s.eps_fn.c == 0.0:
            fast, slow = "finite", "finite"
            integrals = {"fast": 0.0, "slow": 0.0}
        else:
            r, c = s.eps_fn.r, s.eps_fn.c
            fast = "finite" if r > bexp + 2.0 else "infinite"
            slow = "finite" if r > bexp else "infinite"
            integrals = {
                "fast": _power_tail(c, bexp + 1.0 - r, s.t0),
                "slow": _power_tail(c, bexp - 1.0 - r, s.t0),
            }
            # strong-convergence side conditions, reportable in closed form
            lim_expo = 2.0 + bexp - r
            integrals["t2_beta_eps_limit"] = (
                math.inf if lim_expo > 0.0 else (c if lim_expo == 0.0 else 0.0)
            )
    else:
        fast, slow = "unknown", "unknown"
        integrals = {}

    return ConditionReport(cond6, cond7, cond8, fast, slow, integrals)


def _power_tail(c, expo, t0):
    """Integral of c * t^expo dt from t0 to infinity."""
    if expo >= -1.0:
        return math.inf
    return c * t0 ** (expo + 1.0) / -(expo + 1.0)


def closed_form_fast_integral(s):
    """Exact tail integral of t beta(t) eps(t), or None for custom families.

    Returns inf when divergent; for beta = t^b with eps = t^-(b+3) the value
    reduces to 1/t0 up to one floating rounding.
    """
    if not _is_power_pair(s):
        return None
    if s.eps_fn.kind == "zero" or s.eps_fn.c == 0.0:
        return 0.0
    return _power_tail(s.eps_fn.c, 1.0 + s.beta_fn.beta_exp - s.eps_fn.r, s.t0)


def closed_form_slow_integral(s):
    """Exact tail integral of beta(t) eps(t) / t, or None for custom families."""
    if not _is_power_pair(s):
        return None
    if s.eps_fn.kind == "zero" or s.eps_fn.c == 0.0:
        return 0.0
    return _power_tail(s.eps_fn.c, s.beta_fn.beta_exp - 1.0 - s.eps_fn.r, s.t0)
