"""Stabilizing Riccati machinery for the quadratic model.

The quadratic model prices the reference as X = exp(|Y|^2) for a
d-dimensional OU state Y with dY = (b + B Y) dt + sigma dW and a = sigma
sigma^T.  Its exponential-quadratic eigenfunction exp(-u^T y - y^T V y) is
admissible when V is the *stabilizing* solution of

    2 V a V - B^T V - V B - q a = 0,          q = 2 alpha beta (beta - 1),

meaning V is symmetric and the closed loop F = B - 2 a V is Hurwitz, and u
solves the linear system (2 V a - B^T) u = 2 V b.

Algorithm
---------
Form the 2d x 2d Hamiltonian-type matrix

    H = [[ B,   -2a ],
         [ -q a, -B^T ]],

take an ordered real Schur decomposition selecting the d-dimensional stable
invariant subspace spanned by [U; W], and set V = W U^{-1}.  (Eigenvalues of
H come in +/- pairs; a complementary stable subspace of dimension d exists
exactly when a stabilizing solution does.)  One Newton pass through the
Sylvester-linearized residual then polishes V to full accuracy.

The factor on the lower-left block is -q a, not -2 q a: with it, the scalar
case a=1, B=-1 gives V = (-1 + sqrt(1 + 2q))/2 and closed loop
-sqrt(1 + 2q), which is the unique stabilizing root of 2V^2 + 2V - q = 0.
"""

from __future__ import annotations

import math

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from .errors import IllConditioned, NoStabilizingSolution, NotHurwitz, SingularSystem
from .models import Quadratic

__all__ = [
    "RiccatiSolution",
    "StationaryGaussian",
    "ConvergenceMatrix",
    "QuadraticSolution",
    "solve_stabilizing_riccati",
    "scalar_stabilizing_v",
    "compute_u",
    "quadratic_eigenvalue",
    "stationary_covariance",
    "convergence_matrices",
    "solve_quadratic_model",
]

SYMMETRY_TOL = 1e-12
RESIDUAL_TOL = 1e-10
EIG_MARGIN = 1e-10
COND_LIMIT = 1e12


@dataclass(frozen=True)
class RiccatiSolution:
    """Stabilizing solution bundle.

    ``residual`` is the max-abs entry of 2VaV - B^T V - V B - q a; ``stable``
    records whether every eigenvalue of the closed loop B - 2aV has a
    strictly negative real part.
    """

    V: np.ndarray
    closed_loop: np.ndarray
    stable: bool
    residual: float
    u: np.ndarray | None = None
    lam: float | None = None


@dataclass(frozen=True)
class StationaryGaussian:
    """Invariant Gaussian law of the drift-shifted OU state."""

    mean: np.ndarray
    covariance: np.ndarray
    lyapunov_residual: float


@dataclass(frozen=True)
class ConvergenceMatrix:
    """Both forms of the moment-convergence test matrix.

    ``c_covariance``  = V + alpha*beta*I - Sigma_inf / 2
    ``c_precision``   = V + alpha*beta*I - inv(Sigma_inf) / 2

    The precision form is the exponent of the Gaussian integral whose
    convergence decides whether the expected utility stays finite, so
    classification uses it; the covariance form is reported alongside.
    Eigenvalues within EIG_MARGIN of zero set the marginal flags.
    """

    c_covariance: np.ndarray
    c_precision: np.ndarray
    eigs_covariance: np.ndarray
    eigs_precision: np.ndarray
    all_negative_covariance: bool
    all_negative_precision: bool
    marginal_covariance: bool
    marginal_precision: bool


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def riccati_residual(V: np.ndarray, a: np.ndarray, Bmat: np.ndarray,
                     q_coeff: float) -> float:
    R = 2.0 * V @ a @ V - Bmat.T @ V - V @ Bmat - q_coeff * a
    return float(np.max(np.abs(R)))


def scalar_stabilizing_v(a: float, B: float, q_coeff: float) -> float:
    """Closed-form stabilizing root for d = 1 (independent check path).

    2 a V^2 - 2 B V - q a = 0 has roots (B +- sqrt(B^2 + 2 q a^2)) / (2a);
    the '+' root makes B - 2 a V = -sqrt(B^2 + 2 q a^2) < 0.
    """
    disc = B * B + 2.0 * q_coeff * a * a
    if disc < 0.0:
        raise NoStabilizingSolution(f"negative discriminant {disc}")
    return (B + np.sqrt(disc)) / (2.0 * a)


def _invariant_subspace_solution(a, Bmat, q_coeff, side: str) -> np.ndarray:
    d = Bmat.shape[0]
    H = np.zeros((2 * d, 2 * d))
    H[:d, :d] = Bmat
    H[:d, d:] = -2.0 * a
    H[d:, :d] = -q_coeff * a
    H[d:, d:] = -Bmat.T
    _, Z, sdim = sla.schur(H, output="real", sort=side)
    if sdim != d:
        raise NoStabilizingSolution(
            f"{side} invariant subspace has dimension {sdim}, expected {d} "
            f"(q_coeff={q_coeff})")
    U = Z[:d, :d]
    W = Z[d:, :d]
    cond = np.linalg.cond(U)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditioned(f"subspace basis condition number {cond:.3e}")
    V = sla.solve(U.T, W.T).T
    asym = float(np.max(np.abs(V - V.T)))
    if asym > 1e-6 * max(1.0, float(np.max(np.abs(V)))):
        raise NoStabilizingSolution(f"subspace solution not symmetric (skew {asym:.3e})")
    return _sym(V)


def _newton_polish(V, a, Bmat, q_coeff):
    F = Bmat - 2.0 * a @ V
    R = 2.0 * V @ a @ V - Bmat.T @ V - V @ Bmat - q_coeff * a
    E = sla.solve_sylvester(F.T, F, R)
    return _sym(V + E)


def solve_stabilizing_riccati(a: np.ndarray, Bmat: np.ndarray,
                              q_coeff: float) -> RiccatiSolution:
    """Solve 2VaV - B^T V - V B - q a = 0 for the stabilizing V.

    Parameters
    ----------
    a : (d, d) array
        Symmetric positive definite diffusion matrix.
    Bmat : (d, d) array
        State-feedback matrix of the OU drift.
    q_coeff : float
        Coefficient of the quadratic killing rate, 2*alpha*beta*(beta-1).
        Existence is guaranteed for q_coeff >= 0 with B stabilizable;
        negative values are attempted and may raise.

    Raises
    ------
    NoStabilizingSolution, IllConditioned
    """
    a = _sym(np.atleast_2d(np.asarray(a, dtype=float)))
    Bmat = np.atleast_2d(np.asarray(Bmat, dtype=float))
    V = _invariant_subspace_solution(a, Bmat, q_coeff, "lhp")
    V = _newton_polish(V, a, Bmat, q_coeff)
    res = riccati_residual(V, a, Bmat, q_coeff)
    scale = max(1.0, float(np.max(np.abs(a))) * max(1.0, float(np.max(np.abs(V)))) ** 2)
    tries = 0
    while res > RESIDUAL_TOL * scale and tries < 3:
        V = _newton_polish(V, a, Bmat, q_coeff)
        res = riccati_residual(V, a, Bmat, q_coeff)
        tries += 1
    if res > RESIDUAL_TOL * scale:
        raise IllConditioned(f"Riccati residual {res:.3e} after refinement")
    F = Bmat - 2.0 * a @ V
    stable = bool(np.max(np.linalg.eigvals(F).real) < 0.0)
    return RiccatiSolution(V=V, closed_loop=F, stable=stable, residual=res)


def anti_stabilizing_riccati(a, Bmat, q_coeff) -> RiccatiSolution:
    """Anti-stable branch (for negative tests: its closed loop is not Hurwitz)."""
    a = _sym(np.atleast_2d(np.asarray(a, dtype=float)))
    Bmat = np.atleast_2d(np.asarray(Bmat, dtype=float))
    V = _invariant_subspace_solution(a, Bmat, q_coeff, "rhp")
    F = Bmat - 2.0 * a @ V
    stable = bool(np.max(np.linalg.eigvals(F).real) < 0.0)
    return RiccatiSolution(V=V, closed_loop=F, stable=stable,
                           residual=riccati_residual(V, a, Bmat, q_coeff))


def compute_u(V: np.ndarray, a: np.ndarray, Bmat: np.ndarray,
              b: np.ndarray) -> np.ndarray:
    """Drift-shift vector u solving (2 V a - B^T) u = 2 V b.

    This is the well-posed form of u = 2 (2a - V^{-1} B^T)^{-1} b multiplied
    through by V, so it also covers singular V (q_coeff = 0 gives V = 0 and,
    for invertible B^T, u = 0).
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    M = 2.0 * V @ a - Bmat.T
    rhs = 2.0 * V @ np.asarray(b, dtype=float)
    try:
        with np.errstate(all="ignore"):
            u = sla.solve(M, rhs)
    except sla.LinAlgError as exc:
        raise SingularSystem(f"2Va - B^T is singular: {exc}") from exc
    resid = float(np.max(np.abs(M @ u - rhs))) if np.all(np.isfinite(u)) else math.inf
    if not resid <= 1e-12 * max(1.0, float(np.max(np.abs(rhs)))):
        raise SingularSystem(f"drift-shift system residual {resid:.3e}")
    return u


def quadratic_eigenvalue(V: np.ndarray, u: np.ndarray, a: np.ndarray,
                         b: np.ndarray) -> float:
    """Eigenvalue paired with exp(-u^T y - y^T V y):

    lambda = -u^T a u / 2 + tr(a V) + u^T b.
    """
    u = np.asarray(u, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(-0.5 * u @ a @ u + np.trace(a @ V) + u @ b)


def stationary_covariance(closed_loop: np.ndarray, a: np.ndarray,
                          drift_const: np.ndarray | None = None) -> StationaryGaussian:
    """Invariant Gaussian of dY = (drift_const + F Y) dt + sigma dW.

    Solves the Lyapunov equation F Sigma + Sigma F^T + a = 0 and, when the
    constant drift term (b - a u under the transformed measure) is supplied,
    the mean equation F mu + drift_const = 0.

    Raises
    ------
    NotHurwitz
        If any eigenvalue of ``closed_loop`` has a non-negative real part.
    """
    F = np.atleast_2d(np.asarray(closed_loop, dtype=float))
    a = _sym(np.atleast_2d(np.asarray(a, dtype=float)))
    max_re = float(np.max(np.linalg.eigvals(F).real))
    if max_re >= 0.0:
        raise NotHurwitz(f"closed loop has eigenvalue with real part {max_re:.3e}")
    sigma_inf = _sym(sla.solve_lyapunov(F, -a))
    resid = float(np.max(np.abs(F @ sigma_inf + sigma_inf @ F.T + a)))
    if drift_const is None:
        mean = np.zeros(F.shape[0])
    else:
        mean = sla.solve(F, -np.asarray(drift_const, dtype=float))
    return StationaryGaussian(mean=mean, covariance=sigma_inf, lyapunov_residual=resid)


def convergence_matrices(V: np.ndarray, alpha: float, beta: float,
                         sigma_inf: np.ndarray) -> ConvergenceMatrix:
    """Both forms of the utility-moment convergence matrix (see class doc)."""
    d = V.shape[0]
    shift = alpha * beta * np.eye(d)
    c_cov = _sym(V + shift - 0.5 * sigma_inf)
    c_prec = _sym(V + shift - 0.5 * np.linalg.inv(sigma_inf))
    e_cov = np.sort(np.linalg.eigvalsh(c_cov))
    e_prec = np.sort(np.linalg.eigvalsh(c_prec))
    return ConvergenceMatrix(
        c_covariance=c_cov,
        c_precision=c_prec,
        eigs_covariance=e_cov,
        eigs_precision=e_prec,
        all_negative_covariance=bool(e_cov[-1] < -EIG_MARGIN),
        all_negative_precision=bool(e_prec[-1] < -EIG_MARGIN),
        marginal_covariance=bool(abs(e_cov[-1]) <= EIG_MARGIN),
        marginal_precision=bool(abs(e_prec[-1]) <= EIG_MARGIN),
    )


@dataclass(frozen=True)
class QuadraticSolution:
    """Everything the quadratic model needs downstream, solved once."""

    riccati: RiccatiSolution
    stationary: StationaryGaussian
    convergence: ConvergenceMatrix
    q_coeff: float

    @property
    def V(self) -> np.ndarray:
        return self.riccati.V

    @property
    def u(self) -> np.ndarray:
        return self.riccati.u

    @property
    def lam(self) -> float:
        return self.riccati.lam


def solve_quadratic_model(model: Quadratic, alpha: float, beta: float) -> QuadraticSolution:
    """Solve the full eigen/stationarity chain for one (alpha, beta).

    Raises ``NoStabilizingSolution`` / ``NotHurwitz`` if the stabilizing
    branch does not exist for the requested killing coefficient (possible
    when beta is inside (0, 1), where q_coeff < 0).
    """
    a = model.a
    q_coeff = 2.0 * alpha * beta * (beta - 1.0)
    sol = solve_stabilizing_riccati(a, model.Bmat, q_coeff)
    if not sol.stable:
        raise NoStabilizingSolution("closed loop is not Hurwitz")
    u = compute_u(sol.V, a, model.Bmat, model.b)
    lam = quadratic_eigenvalue(sol.V, u, a, model.b)
    sol = replace(sol, u=u, lam=lam)
    stat = stationary_covariance(sol.closed_loop, a, drift_const=model.b - a @ u)
    conv = convergence_matrices(sol.V, alpha, beta, stat.covariance)
    return QuadraticSolution(riccati=sol, stationary=stat, convergence=conv,
                             q_coeff=q_coeff)
