"""Vector field of the damped primal-dual flow.

The state is a triple (x, lam, v): primal point, multiplier estimate and
primal velocity.  With schedule coefficients gamma(t), beta(t), eps(t) and
the augmented-Lagrangian gradient of the underlying problem, the flow is

    x'   = v
    lam' = t * beta(t) * (A (x + theta t v) - b)
    v'   = -gamma(t) v - beta(t) * (grad_x L_sigma(x, lam) + eps(t) x)

Disabling the regularizer (``tikhonov_enabled=False``) removes only the
``eps(t) x`` term; everything else is untouched, which makes ablation runs
directly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .integrator import NonFiniteField
from .problem import ProblemInstance, grad_x_lagrangian
from .schedule import CoefficientSchedule, eval_schedule

__all__ = [
    "SystemState",
    "DynamicsConfig",
    "pack",
    "unpack",
    "rhs",
    "flat_field",
    "local_lipschitz_bound",
]


class SystemState:
    """Immutable (x, lam, v) triple of float arrays."""

    __slots__ = ("x", "lam", "v")

    def __init__(self, x, lam, v):
        self.x = np.asarray(x, dtype=float)
        self.lam = np.asarray(lam, dtype=float)
        self.v = np.asarray(v, dtype=float)
        if self.x.ndim != 1 or self.lam.ndim != 1 or self.v.ndim != 1:
            raise ValueError("state components must be one dimensional")
        if self.v.shape != self.x.shape:
            raise ValueError("velocity and primal blocks must have equal length")
        for part in (self.x, self.lam, self.v):
            if not np.all(np.isfinite(part)):
                raise ValueError("state components must be finite")

    def __repr__(self):
        return f"SystemState(x={self.x!r}, lam={self.lam!r}, v={self.v!r})"


def pack(state: SystemState) -> np.ndarray:
    """Flatten a state to the integrator layout [x, lam, v]."""
    return np.concatenate([state.x, state.lam, state.v])


def unpack(flat: np.ndarray, n: int, m: int) -> SystemState:
    """Rebuild a state from the flat layout; lengths must match exactly."""
    flat = np.asarray(flat, dtype=float)
    if flat.shape != (2 * n + m,):
        raise ValueError(f"expected flat state of length {2 * n + m}, got {flat.shape}")
    return SystemState(flat[:n], flat[n:n + m], flat[n + m:])


@dataclass
class DynamicsConfig:
    """Problem plus schedule, with an ablation switch for the regularizer."""

    problem: ProblemInstance
    schedule: CoefficientSchedule
    tikhonov_enabled: bool = True
    _lip_C: float = field(default=None, init=False, repr=False)

    def coupling_constant(self) -> float:
        """L + sigma ||A^T A|| + ||A||, cached after the first call."""
        if self._lip_C is None:
            p = self.problem
            self._lip_C = (p.objective.lipschitz()
                           + p.penalty * p.norm_AtA()
                           + p.norm_A())
        return self._lip_C


def rhs(cfg: DynamicsConfig, t: float, state: SystemState) -> SystemState:
    """Evaluate the vector field at time t.

    Raises NonFiniteField (carrying t) if the input state or the computed
    derivative contains a NaN or infinity, so the integrator can report
    where the trajectory blew up.
    """
    p = cfg.problem
    x, lam, v = state.x, state.lam, state.v
    if x.shape[0] != p.dim_primal or lam.shape[0] != p.dim_dual:
        raise ValueError("state dimensions do not match the problem")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(lam)) and np.all(np.isfinite(v))):
        raise NonFiniteField(t)

    _, _, beta, _, eps, _ = eval_schedule(cfg.schedule, t)
    gamma = cfg.schedule.gamma(t)
    theta = cfg.schedule.theta

    dlam = t * beta * (p.constraint_matrix @ (x + (theta * t) * v) - p.constraint_rhs)
    grad = grad_x_lagrangian(p, x, lam)
    if cfg.tikhonov_enabled:
        grad = grad + eps * x
    dv = -gamma * v - beta * grad

    if not (np.all(np.isfinite(dlam)) and np.all(np.isfinite(dv))):
        raise NonFiniteField(t)
    return SystemState(v, dlam, dv)


def flat_field(cfg: DynamicsConfig):
    """Adapter returning f(t, y_flat) -> dy_flat for the generic integrator."""
    n, m = cfg.problem.dim_primal, cfg.problem.dim_dual

    def field(t, y):
        return pack(rhs(cfg, t, unpack(y, n, m)))

    return field


def local_lipschitz_bound(cfg: DynamicsConfig, t: float) -> float:
    """Upper bound on the Lipschitz constant of y -> rhs(t, y).

    Uses C = L + sigma ||A^T A|| + ||A|| and returns

        1 + C beta + gamma + ||A|| theta t^2 beta + ||A|| t beta + beta eps

    which dominates the operator norm of the (block affine) Jacobian.
    """
    _, _, beta, _, eps, _ = eval_schedule(cfg.schedule, t)
    gamma = cfg.schedule.gamma(t)
    theta = cfg.schedule.theta
    nA = cfg.problem.norm_A()
    C = cfg.coupling_constant()
    bound = 1.0 + C * beta + gamma + nA * theta * t * t * beta + nA * t * beta
    if cfg.tikhonov_enabled:
        bound += beta * eps
    return bound
