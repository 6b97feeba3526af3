"""Equality-constrained convex problems and their reference solutions.

A problem is  min f(x)  subject to  A x = b,  with f convex and smooth.
This module owns the augmented Lagrangian

    L_sigma(x, lam) = f(x) + <lam, Ax - b> + (sigma/2) ||Ax - b||^2,

its primal gradient, KKT reference solutions, the minimal-norm solution of
the primal solution set, and the operator norms the rest of the engine needs.
"""

import warnings

import numpy as np

from .rng import SplitMix64

TOL_KKT = 1e-8
_FEAS_TOL = 1e-8


class QuadraticObjective:
    """f(x) = (1/2) x^T M x + q^T x with M symmetric positive semidefinite."""

    def __init__(self, hessian, linear):
        M = np.asarray(hessian, dtype=float)
        q = np.asarray(linear, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError(f"hessian must be square, got shape {M.shape}")
        if q.shape != (M.shape[0],):
            raise ValueError(f"linear term has length {q.shape}, expected {M.shape[0]}")
        scale = np.linalg.norm(M, 2) if M.size else 0.0
        if np.linalg.norm(M - M.T, 2) > 1e-12 * (1.0 + scale):
            raise ValueError("hessian is not symmetric")
        if M.shape[0] and np.linalg.eigvalsh(M)[0] < -1e-8 * max(scale, 1e-300):
            raise ValueError("hessian is not positive semidefinite")
        self.hessian = M
        self.linear = q
        self.hessian.setflags(write=False)
        self.linear.setflags(write=False)

    @property
    def dim(self):
        return self.hessian.shape[0]

    def value(self, x):
        return 0.5 * x @ (self.hessian @ x) + self.linear @ x

    def grad(self, x):
        return self.hessian @ x + self.linear

    def lipschitz(self):
        return lipschitz_constant(self)


class CallableObjective:
    """Smooth objective given as value/gradient callables.

    A gradient Lipschitz estimate must be declared by the caller; nothing in
    the engine can recover it from black-box callables.
    """

    def __init__(self, value_fn, grad_fn, lipschitz_estimate, dim):
        if lipschitz_estimate <= 0:
            raise ValueError("lipschitz_estimate must be positive")
        self._value = value_fn
        self._grad = grad_fn
        self._lip = float(lipschitz_estimate)
        self.dim = int(dim)

    def value(self, x):
        return float(self._value(x))

    def grad(self, x):
        return np.asarray(self._grad(x), dtype=float)

    def lipschitz(self):
        return self._lip


class ProblemInstance:
    """Immutable bundle of objective, constraints (A, b) and penalty sigma."""

    def __init__(self, objective, constraint_matrix, constraint_rhs, penalty):
        A = np.asarray(constraint_matrix, dtype=float)
        b = np.asarray(constraint_rhs, dtype=float)
        if penalty < 0:
            raise ValueError("penalty sigma must be nonnegative")
        if A.ndim != 2:
            raise ValueError("constraint matrix must be 2-d")
        if A.shape[1] != objective.dim:
            raise ValueError(
                f"constraint matrix has {A.shape[1]} columns, objective dim is {objective.dim}"
            )
        if b.shape != (A.shape[0],):
            raise ValueError(f"rhs has length {b.shape}, expected {A.shape[0]}")
        # nonempty feasible set: least-squares residual of Ax = b near zero
        x_ls, *_ = np.linalg.lstsq(A, b, rcond=None)
        if np.linalg.norm(A @ x_ls - b) > _FEAS_TOL * (1.0 + np.linalg.norm(b)):
            raise ValueError("constraint system Ax = b has no solution")
        self.objective = objective
        self.constraint_matrix = A
        self.constraint_rhs = b
        self.penalty = float(penalty)
        A.setflags(write=False)
        b.setflags(write=False)
        self._norm_A = None
        self._norm_AtA = None

    @property
    def dim_primal(self):
        return self.objective.dim

    @property
    def dim_dual(self):
        return self.constraint_matrix.shape[0]

    def norm_A(self):
        """Spectral norm of A, cached after the first power iteration."""
        if self._norm_A is None:
            self._norm_AtA = _power_iteration(
                self.constraint_matrix.T @ self.constraint_matrix
            )
            self._norm_A = float(np.sqrt(self._norm_AtA))
        return self._norm_A

    def norm_AtA(self):
        """Spectral norm of A^T A (equals ||A||^2), cached."""
        self.norm_A()
        return self._norm_AtA


class SaddlePoint:
    """Primal-dual pair (x*, lam*) at which L_sigma has a saddle."""

    def __init__(self, primal, dual):
        self.primal = np.asarray(primal, dtype=float)
        self.dual = np.asarray(dual, dtype=float)

    @classmethod
    def checked(cls, primal, dual, problem, tol=TOL_KKT):
        sp = cls(primal, dual)
        A = problem.constraint_matrix
        feas = np.linalg.norm(A @ sp.primal - problem.constraint_rhs)
        stat = np.linalg.norm(problem.objective.grad(sp.primal) + A.T @ sp.dual)
        if feas > tol:
            raise ValueError(f"candidate saddle point infeasible: ||Ax-b|| = {feas:.3e}")
        if stat > tol:
            raise ValueError(f"candidate saddle point not stationary: residual {stat:.3e}")
        return sp


def _check_dims(p, x, lam):
    if x.shape != (p.dim_primal,):
        raise ValueError(f"x has shape {x.shape}, expected ({p.dim_primal},)")
    if lam.shape != (p.dim_dual,):
        raise ValueError(f"lam has shape {lam.shape}, expected ({p.dim_dual},)")


def augmented_lagrangian(p, x, lam):
    """L_sigma(x, lam) = f(x) + <lam, Ax-b> + (sigma/2)||Ax-b||^2."""
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    _check_dims(p, x, lam)
    residual = p.constraint_matrix @ x - p.constraint_rhs
    return (
        p.objective.value(x)
        + lam @ residual
        + 0.5 * p.penalty * (residual @ residual)
    )


def grad_x_lagrangian(p, x, lam):
    """Primal gradient grad f(x) + A^T lam + sigma A^T (Ax - b)."""
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    _check_dims(p, x, lam)
    A = p.constraint_matrix
    residual = A @ x - p.constraint_rhs
    return p.objective.grad(x) + A.T @ lam + p.penalty * (A.T @ residual)


def kkt_saddle_point(objective, A, b):
    """Solve the KKT system  Mx + q + A^T lam = 0,  Ax = b.

    A singular but consistent system falls back to the minimum-norm
    least-squares solution (with a warning); an inconsistent one raises.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = objective.dim
    m = A.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = objective.hessian
    K[:n, n:] = A.T
    K[n:, :n] = A
    rhs = np.concatenate([-objective.linear, b])
    try:
        sol = np.linalg.solve(K, rhs)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError("non-finite KKT solution")
    except np.linalg.LinAlgError:
        sol, _, rank, _ = np.linalg.lstsq(K, rhs, rcond=None)
        resid = np.linalg.norm(K @ sol - rhs)
        if resid > TOL_KKT * (1.0 + np.linalg.norm(rhs)):
            raise np.linalg.LinAlgError(
                f"KKT system inconsistent: rank {rank} of {n + m}, residual {resid:.3e}"
            )
        warnings.warn(
            f"singular KKT system (rank {rank} of {n + m}); "
            "using minimum-norm least-squares solution",
            stacklevel=2,
        )
    x_star = sol[:n]
    lam_star = sol[n:]
    feas = np.linalg.norm(A @ x_star - b)
    stat = np.linalg.norm(objective.hessian @ x_star + objective.linear + A.T @ lam_star)
    if feas > TOL_KKT or stat > TOL_KKT:
        raise np.linalg.LinAlgError(
            f"KKT residuals too large: feasibility {feas:.3e}, stationarity {stat:.3e}"
        )
    return SaddlePoint(x_star, lam_star)


def minimal_norm_solution(p, hint):
    """Least-norm point of the primal solution set S.

    For quadratic objectives S is the affine set hint.primal + null([A; M]):
    moving inside S requires staying feasible (A d = 0) and keeping the
    objective flat, which for convex quadratics forces M d = 0.  The
    orthogonal projection of the origin onto that affine set is exact.
    """
    obj = p.objective
    if not isinstance(obj, QuadraticObjective):
        from .analysis import tikhonov_point

        warnings.warn(
            "non-quadratic objective: minimal-norm solution approximated "
            "by the regularized-path limit",
            stacklevel=2,
        )
        lam_hat, _ = minimal_norm_multiplier(p, hint.primal)
        x = hint.primal
        for eps in (1e-2, 1e-4, 1e-6, 1e-8):
            x = tikhonov_point(p, lam_hat, eps, x0=x)
        return x

    x0 = hint.primal
    stacked = np.vstack([p.constraint_matrix, obj.hessian])
    _, svals, vt = np.linalg.svd(stacked)
    cutoff = max(stacked.shape) * np.finfo(float).eps * (svals[0] if len(svals) else 0.0)
    rank = int(np.sum(svals > cutoff))
    null_basis = vt[rank:].T
    if null_basis.shape[1] == 0:
        return x0.copy()
    return x0 - null_basis @ (null_basis.T @ x0)


def minimal_norm_multiplier(p, x_hat):
    """Least-squares multiplier paired with x_hat: A^T lam = -grad f(x_hat).

    Returns (lam_hat, residual); residual is nonzero only when no exact
    multiplier exists, which callers should treat as a modeling error.
    """
    rhs = -p.objective.grad(x_hat)
    lam, *_ = np.linalg.lstsq(p.constraint_matrix.T, rhs, rcond=None)
    residual = float(np.linalg.norm(p.constraint_matrix.T @ lam - rhs))
    return lam, residual


def _power_iteration(M, rel_tol=1e-10, max_iter=10000):
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    n = M.shape[0]
    if n == 0 or not np.any(M):
        return 0.0
    v = SplitMix64(0x9E3779B9).normals(n)
    v /= np.linalg.norm(v)
    ray = 0.0
    for _ in range(max_iter):
        w = M @ v
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        ray_new = float(v @ (M @ v))
        if abs(ray_new - ray) <= rel_tol * max(abs(ray_new), 1e-300):
            return ray_new
        ray = ray_new
    raise RuntimeError(
        f"power iteration did not converge in {max_iter} iterations; "
        f"last Rayleigh quotient {ray:.17g}"
    )


def lipschitz_constant(q):
    """Gradient Lipschitz constant of a quadratic objective: lambda_max(M)."""
    return _power_iteration(q.hessian)


def spectral_norm(A):
    """Spectral norm of a rectangular matrix via power iteration on A^T A."""
    A = np.asarray(A, dtype=float)
    return float(np.sqrt(_power_iteration(A.T @ A)))


def save_problem(p, path):
    """Write a problem to the flat text format (keys n, m, sigma, M, q, A, b)."""
    obj = p.objective
    if not isinstance(obj, QuadraticObjective):
        raise ValueError("only quadratic objectives have a file representation")

    def row(values):
        return " ".join(repr(float(v)) for v in values)

    lines = [
        f"n = {p.dim_primal}",
        f"m = {p.dim_dual}",
        f"sigma = {p.penalty!r}",
        f"M = {row(obj.hessian.ravel())}",
        f"q = {row(obj.linear)}",
        f"A = {row(p.constraint_matrix.ravel())}",
        f"b = {row(p.constraint_rhs)}",
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_problem(path):
    """Read a problem written by save_problem."""
    entries = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            entries[key.strip()] = value.strip()
    missing = {"n", "m", "sigma", "M", "q", "A", "b"} - set(entries)
    if missing:
        raise ValueError(f"problem file {path} missing keys: {sorted(missing)}")
    n = int(entries["n"])
    m = int(entries["m"])
    parse = lambda s: np.array([float(tok) for tok in s.split()])
    M = parse(entries["M"]).reshape(n, n)
    q = parse(entries["q"])
    A = parse(entries["A"]).reshape(m, n)
    b = parse(entries["b"])
    return ProblemInstance(QuadraticObjective(M, q), A, b, float(entries["sigma"]))
