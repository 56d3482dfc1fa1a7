"""Eigenpairs of each model's generator-with-killing, plus residual certificates.

For a diffusion state G with generator L and a killing rate k, the pair
(lambda, phi) with L phi = -lambda phi and phi > 0 turns the path-dependent
expectation E[exp(-int k(G_s) ds) f(G_t)] into a marginal one under a
drift-shifted measure, at the cost of the factor exp(-lambda t).  Every model
in the catalog admits a closed-form pair in one of five parametric families;
this module produces the pair and certifies it numerically by evaluating the
generator residual with exact derivatives of the family (finite differences
are available as an independent cross-check mode).

The state G and the measure under which its generator is taken vary by
variant: for scalar reference models it is the reference itself; for the
stochastic-volatility and stochastic-rate models it is the driver (variance
or rate) after the reference Brownian has been absorbed by an exponential
tilt, which shifts the driver's drift by alpha*beta*delta*sigma-type
correlation terms.  The coefficient tables below encode exactly the
generator each pair is certified against; the Monte Carlo module simulates
the same dynamics for the martingale certificates.

One deliberate deviation from the usual write-up of the Vasicek-rate case:
solving the generator equation for phi(r) = exp(s r) with killing
alpha*(beta-1)*r forces s = alpha*(1-beta)/a and

    lambda = -delta^2 s^2 / 2 - (theta + alpha*beta*delta*sigma*rho) s,

i.e. the rate-level term enters the eigenvalue with a minus sign.  The
residual certificate and the Monte Carlo oracle both confirm this branch;
see the optimal-leverage module for the published-curve variant kept for
figure reproduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import ComplexKappa, GridOutsideDomain
from .models import (
    ExtendedCir,
    Garch,
    Gbm,
    GbmInverseGarchRate,
    GbmVasicek,
    HestonSV,
    InverseGarch,
    Quadratic,
    ThreeHalves,
    ThreeHalvesSV,
    ValidatedProblem,
)
from .riccati import solve_quadratic_model

__all__ = [
    "Constant",
    "Power",
    "ExpLinear",
    "ExpLinearPower",
    "ExpQuadratic",
    "EigenFunction",
    "Eigenpair",
    "GeneratorResidual",
    "GeneratorCoefficients",
    "eigenpair",
    "generator_coefficients",
    "generator_residual",
    "default_grid",
    "q_dynamics",
    "QDrift",
]

RESIDUAL_EPS = 1e-300


# ---------------------------------------------------------------------------
# Eigenfunction families (exact log-values and derivative ratios)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constant:
    """phi(x) = 1."""

    name = "constant"

    def log_phi(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def d1_ratio(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def d2_ratio(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def describe(self) -> str:
        return "constant"


@dataclass(frozen=True)
class Power:
    """phi(x) = x**p on x > 0."""

    p: float
    name = "power"

    def log_phi(self, x):
        return self.p * np.log(x)

    def d1_ratio(self, x):
        return self.p / np.asarray(x, dtype=float)

    def d2_ratio(self, x):
        x = np.asarray(x, dtype=float)
        return self.p * (self.p - 1.0) / (x * x)

    def describe(self) -> str:
        return f"power(p={self.p:.12g})"


@dataclass(frozen=True)
class ExpLinear:
    """phi(x) = exp(-c x).  Negative c gives a growing exponential."""

    c: float
    name = "exp_linear"

    def log_phi(self, x):
        return -self.c * np.asarray(x, dtype=float)

    def d1_ratio(self, x):
        return np.full_like(np.asarray(x, dtype=float), -self.c)

    def d2_ratio(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.c * self.c)

    def describe(self) -> str:
        return f"exp_linear(c={self.c:.12g})"


@dataclass(frozen=True)
class ExpLinearPower:
    """phi(x) = exp(-c x) * x**p on x > 0."""

    c: float
    p: float
    name = "exp_linear_power"

    def log_phi(self, x):
        x = np.asarray(x, dtype=float)
        return -self.c * x + self.p * np.log(x)

    def d1_ratio(self, x):
        return self.p / np.asarray(x, dtype=float) - self.c

    def d2_ratio(self, x):
        x = np.asarray(x, dtype=float)
        g = self.p / x - self.c
        return g * g - self.p / (x * x)

    def describe(self) -> str:
        return f"exp_linear_power(c={self.c:.12g}, p={self.p:.12g})"


@dataclass(frozen=True, eq=False)
class ExpQuadratic:
    """phi(y) = exp(-u^T y - y^T V y) on R^d, V symmetric."""

    u: np.ndarray
    V: np.ndarray
    name = "exp_quadratic"

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        V = np.asarray(self.V, dtype=float)
        if np.max(np.abs(V - V.T)) > 1e-12 * max(1.0, float(np.max(np.abs(V)))):
            raise ValueError("V must be symmetric")
        object.__setattr__(self, "V", 0.5 * (V + V.T))

    def log_phi(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return -(y @ self.u) - np.einsum("ni,ij,nj->n", y, self.V, y)

    def grad_ratio(self, y):
        """grad phi / phi = -(u + 2 V y), shape (n, d)."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return -(self.u[None, :] + 2.0 * y @ self.V)

    def hess_ratio(self, y):
        """Hess phi / phi = g g^T - 2V with g = u + 2 V y, shape (n, d, d)."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        g = self.u[None, :] + 2.0 * y @ self.V
        return np.einsum("ni,nj->nij", g, g) - 2.0 * self.V[None, :, :]

    def describe(self) -> str:
        return f"exp_quadratic(d={self.u.shape[0]})"


EigenFunction = Union[Constant, Power, ExpLinear, ExpLinearPower, ExpQuadratic]


@dataclass(frozen=True)
class Eigenpair:
    """Eigenvalue, eigenfunction, and the auxiliary exponent where one exists."""

    lam: float
    phi: EigenFunction
    kappa: float | None = None


# ---------------------------------------------------------------------------
# Generator coefficient tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorCoefficients:
    """Scalar generator L f = variance/2 f'' + drift f' - killing f.

    ``domain`` is "positive" or "real"; grids are checked against it.
    """

    variance: Callable[[np.ndarray], np.ndarray]
    drift: Callable[[np.ndarray], np.ndarray]
    killing: Callable[[np.ndarray], np.ndarray]
    domain: str


def _sqrt_or_raise(radicand: float, context: str) -> float:
    if radicand < 0.0:
        raise ComplexKappa(f"negative square-root argument {radicand:.6g} in {context}")
    return math.sqrt(radicand)


def _stable_root_minus(h: float, q: float, context: str) -> float:
    """sqrt(h**2 + q) - h without cancellation for h > 0.

    Uses the identity sqrt(h^2+q) - h = q / (sqrt(h^2+q) + h); the direct
    difference loses most of its digits when |q| << h^2, which happens for
    strongly mean-reverting parameters.
    """
    root = _sqrt_or_raise(h * h + q, context)
    if h > 0.0:
        return q / (root + h)
    return root - h


def generator_coefficients(vp: ValidatedProblem) -> GeneratorCoefficients:
    """Coefficients of the generator-with-killing the eigenpair satisfies."""
    m = vp.model
    alpha, beta = vp.alpha, vp.beta
    if isinstance(m, Gbm):
        s2, mu = m.sigma ** 2, m.mu
        k = 0.5 * alpha * beta * (beta - 1.0) * s2
        return GeneratorCoefficients(
            variance=lambda x: s2 * x * x,
            drift=lambda x: mu * x,
            killing=lambda x: np.full_like(np.asarray(x, float), k),
            domain="positive")
    if isinstance(m, Garch):
        s2, th, a = m.sigma ** 2, m.theta, m.a
        k = 0.5 * alpha * beta * (beta - 1.0) * s2
        return GeneratorCoefficients(
            variance=lambda x: s2 * x * x,
            drift=lambda x: th - a * x,
            killing=lambda x: np.full_like(np.asarray(x, float), k),
            domain="positive")
    if isinstance(m, InverseGarch):
        s2, th, a = m.sigma ** 2, m.theta, m.a
        k = 0.5 * alpha * beta * (beta - 1.0) * s2
        return GeneratorCoefficients(
            variance=lambda x: s2 * x * x,
            drift=lambda x: (th - a * x) * x,
            killing=lambda x: np.full_like(np.asarray(x, float), k),
            domain="positive")
    if isinstance(m, ExtendedCir):
        s2, th, mu = m.sigma ** 2, m.theta, m.mu
        kc = 0.5 * alpha * beta * (beta - 1.0) * s2
        return GeneratorCoefficients(
            variance=lambda x: s2 * x,
            drift=lambda x: th + mu * x,
            killing=lambda x: kc / np.asarray(x, float),
            domain="positive")
    if isinstance(m, ThreeHalves):
        s2, th, a = m.sigma ** 2, m.theta, m.a
        kc = 0.5 * alpha * beta * (beta - 1.0) * s2
        return GeneratorCoefficients(
            variance=lambda x: s2 * x ** 3,
            drift=lambda x: (th - a * x) * x,
            killing=lambda x: kc * np.asarray(x, float),
            domain="positive")
    if isinstance(m, HestonSV):
        d2, th = m.delta ** 2, m.theta
        a_t = m.a - alpha * beta * m.delta * m.rho  # tilted reversion speed
        kc = 0.5 * alpha * (1.0 - alpha) * beta * beta
        return GeneratorCoefficients(
            variance=lambda v: d2 * v,
            drift=lambda v: th - a_t * v,
            killing=lambda v: kc * np.asarray(v, float),
            domain="positive")
    if isinstance(m, ThreeHalvesSV):
        d2, th = m.delta ** 2, m.theta
        a_t = m.a - alpha * beta * m.delta * m.rho
        kc = 0.5 * alpha * (1.0 - alpha) * beta * beta
        return GeneratorCoefficients(
            variance=lambda v: d2 * v ** 3,
            drift=lambda v: (th - a_t * v) * v,
            killing=lambda v: kc * np.asarray(v, float),
            domain="positive")
    if isinstance(m, GbmVasicek):
        d2 = m.delta ** 2
        th_t = m.theta + alpha * beta * m.delta * m.sigma * m.rho
        a = m.a
        c = alpha * (beta - 1.0)
        return GeneratorCoefficients(
            variance=lambda r: np.full_like(np.asarray(r, float), d2),
            drift=lambda r: th_t - a * r,
            killing=lambda r: c * np.asarray(r, float),
            domain="real")
    if isinstance(m, GbmInverseGarchRate):
        d2 = m.delta ** 2
        th_t = m.theta + alpha * beta * m.delta * m.sigma * m.rho
        a = m.a
        c = alpha * (beta - 1.0)
        return GeneratorCoefficients(
            variance=lambda r: d2 * r * r,
            drift=lambda r: (th_t - a * r) * r,
            killing=lambda r: c * np.asarray(r, float),
            domain="real")  # state is positive; killing is linear either way
    raise TypeError(f"no scalar generator for model kind {m.kind!r}")


# ---------------------------------------------------------------------------
# Eigenpair dispatch
# ---------------------------------------------------------------------------

def eigenpair(vp: ValidatedProblem) -> Eigenpair:
    """Closed-form admissible eigenpair of the model's generator-with-killing.

    The exponent branch is fixed per model (the other root does not give a
    true martingale); all pairs satisfy L phi = -lambda phi identically,
    which :func:`generator_residual` certifies on a grid.

    Raises
    ------
    ComplexKappa
        If the square-root argument of the exponent is negative (can only
        happen for beta inside (0, 1) at extreme parameters).
    """
    m = vp.model
    alpha, beta = vp.alpha, vp.beta
    bb1 = beta * (beta - 1.0)

    if isinstance(m, Gbm):
        lam = -alpha * beta * m.mu + 0.5 * alpha * (1.0 - alpha) * beta ** 2 * m.sigma ** 2
        return Eigenpair(lam=lam, phi=Power(alpha * beta), kappa=None)

    if isinstance(m, (Garch, InverseGarch)):
        lam = 0.5 * alpha * bb1 * m.sigma ** 2
        return Eigenpair(lam=lam, phi=Constant(), kappa=None)

    if isinstance(m, ExtendedCir):
        half_less = 0.5 - m.theta / m.sigma ** 2
        # half_less <= -1/2, so compute sqrt(...) + half_less stably.
        kappa = _stable_root_minus(-half_less, alpha * bb1, "extended CIR exponent")
        lam = m.mu * kappa + 2.0 * m.theta * m.mu / m.sigma ** 2
        return Eigenpair(lam=lam,
                         phi=ExpLinearPower(c=2.0 * m.mu / m.sigma ** 2, p=kappa),
                         kappa=kappa)

    if isinstance(m, ThreeHalves):
        half_plus = 0.5 + m.a / m.sigma ** 2
        kappa = _stable_root_minus(half_plus, alpha * bb1, "3/2 exponent")
        return Eigenpair(lam=m.theta * kappa, phi=Power(-kappa), kappa=kappa)

    if isinstance(m, HestonSV):
        a_t = m.a - alpha * beta * m.delta * m.rho
        q = alpha * (1.0 - alpha) * beta ** 2 * m.delta ** 2
        kappa = _stable_root_minus(a_t, q, "Heston exponent") / m.delta ** 2
        return Eigenpair(lam=m.theta * kappa, phi=ExpLinear(kappa), kappa=kappa)

    if isinstance(m, ThreeHalvesSV):
        shifted = m.a - alpha * beta * m.delta * m.rho + 0.5 * m.delta ** 2
        q = alpha * (1.0 - alpha) * beta ** 2 * m.delta ** 2
        kappa = _stable_root_minus(shifted, q, "3/2 volatility exponent") / m.delta ** 2
        return Eigenpair(lam=m.theta * kappa, phi=Power(-kappa), kappa=kappa)

    if isinstance(m, GbmVasicek):
        # phi(r) = exp(s r); the killing term forces s = alpha (1-beta)/a,
        # then lambda = -delta^2 s^2/2 - (theta + alpha beta delta sigma rho) s.
        s = alpha * (1.0 - beta) / m.a
        th_t = m.theta + alpha * beta * m.delta * m.sigma * m.rho
        lam = -0.5 * m.delta ** 2 * s * s - th_t * s
        return Eigenpair(lam=lam, phi=ExpLinear(-s), kappa=None)

    if isinstance(m, GbmInverseGarchRate):
        # phi(r) = r**e with e = alpha (1-beta)/a = -kappa.
        e = alpha * (1.0 - beta) / m.a
        th_t = m.theta + alpha * beta * m.delta * m.sigma * m.rho
        lam = -0.5 * m.delta ** 2 * e * (e - 1.0) - th_t * e
        return Eigenpair(lam=lam, phi=Power(e), kappa=-e)

    if isinstance(m, Quadratic):
        sol = solve_quadratic_model(m, alpha, beta)
        return Eigenpair(lam=sol.lam, phi=ExpQuadratic(sol.u, sol.V), kappa=None)

    raise TypeError(f"unknown model kind {m.kind!r}")


# ---------------------------------------------------------------------------
# Residual certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorResidual:
    """Max relative generator residual over a grid.

    The reported quantity is max |L phi / phi + lambda| / (|lambda| + eps)
    evaluated entirely through derivative *ratios*, which keeps the check
    meaningful even where phi itself under- or overflows.
    """

    grid: np.ndarray
    max_abs_residual: float
    mode: str


def default_grid(vp: ValidatedProblem, n: int = 50) -> np.ndarray:
    """Default residual grid: log-spaced on (0, inf) states, linear on R.

    For the quadratic model the grid is a lattice over [-5, 5]^d with about
    ``n`` points in total.
    """
    m = vp.model
    if isinstance(m, Quadratic):
        per_axis = max(2, int(round(n ** (1.0 / m.d))))
        axes = [np.linspace(-5.0, 5.0, per_axis)] * m.d
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=-1)
    if isinstance(m, GbmVasicek):
        return np.linspace(-5.0, 5.0, n)
    return np.geomspace(0.01, 100.0, n)


def _scalar_ratios_fd(phi, x, h_rel=1e-5):
    """phi'/phi and phi''/phi from central differences of log phi.

    The step adapts to the local log-slope so that the exponentiated
    increment stays ~2e-3: steep exponential eigenfunctions would otherwise
    lose the second-derivative ratio to series truncation exactly where the
    generator terms cancel most.
    """
    x = np.asarray(x, dtype=float)
    h0 = h_rel * np.maximum(1.0, np.abs(x))
    lp0 = phi.log_phi(x)
    probe = (phi.log_phi(x + h0) - lp0) / h0
    h = np.minimum(h0, 2e-3 / (np.abs(probe) + 1.0))
    dp = phi.log_phi(x + h) - lp0
    dm = phi.log_phi(x - h) - lp0
    d1 = (np.exp(dp) - np.exp(dm)) / (2.0 * h)
    d2 = (np.exp(dp) - 2.0 + np.exp(dm)) / (h * h)
    return d1, d2


def _quadratic_ratios_fd(phi: ExpQuadratic, y, h=1e-4):
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n, d = y.shape
    lp0 = phi.log_phi(y)
    grad = np.empty((n, d))
    hess = np.empty((n, d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h
        lp_p = phi.log_phi(y + ei) - lp0
        lp_m = phi.log_phi(y - ei) - lp0
        grad[:, i] = (np.exp(lp_p) - np.exp(lp_m)) / (2.0 * h)
        hess[:, i, i] = (np.exp(lp_p) - 2.0 + np.exp(lp_m)) / (h * h)
    for i in range(d):
        for j in range(i + 1, d):
            ei = np.zeros(d); ei[i] = h
            ej = np.zeros(d); ej[j] = h
            lpp = phi.log_phi(y + ei + ej) - lp0
            lpm = phi.log_phi(y + ei - ej) - lp0
            lmp = phi.log_phi(y - ei + ej) - lp0
            lmm = phi.log_phi(y - ei - ej) - lp0
            mixed = (np.exp(lpp) - np.exp(lpm) - np.exp(lmp) + np.exp(lmm)) / (4.0 * h * h)
            hess[:, i, j] = mixed
            hess[:, j, i] = mixed
    return grad, hess


def generator_residual(vp: ValidatedProblem, pair: Eigenpair,
                       grid: np.ndarray | None = None,
                       mode: str = "exact") -> GeneratorResidual:
    """Certify L phi = -lambda phi numerically on a grid.

    Parameters
    ----------
    mode : {"exact", "fd"}
        "exact" uses the closed-form derivative ratios of the eigenfunction
        family; "fd" rebuilds them from central differences of log phi and is
        the independent cross-check (its accuracy is limited by the step).

    Raises
    ------
    GridOutsideDomain
        If any grid point leaves the state space.
    """
    m = vp.model
    if grid is None:
        grid = default_grid(vp)

    if isinstance(m, Quadratic):
        y = np.atleast_2d(np.asarray(grid, dtype=float))
        if y.shape[1] != m.d:
            raise GridOutsideDomain(f"grid dimension {y.shape[1]} != d={m.d}")
        phi: ExpQuadratic = pair.phi  # type: ignore[assignment]
        if mode == "exact":
            g = phi.grad_ratio(y)
            Hr = phi.hess_ratio(y)
        elif mode == "fd":
            g, Hr = _quadratic_ratios_fd(phi, y)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        a = m.a
        q_coeff = 2.0 * vp.alpha * vp.beta * (vp.beta - 1.0)
        drift = m.b[None, :] + y @ m.Bmat.T
        gen = (np.einsum("ni,ni->n", g, drift)
               + 0.5 * np.einsum("nij,ij->n", Hr, a)
               - q_coeff * np.einsum("ni,ij,nj->n", y, a, y))
        resid = np.abs(gen + pair.lam) / (abs(pair.lam) + RESIDUAL_EPS)
        return GeneratorResidual(grid=y, max_abs_residual=float(np.max(resid)),
                                 mode=mode)

    x = np.asarray(grid, dtype=float)
    coeffs = generator_coefficients(vp)
    if coeffs.domain == "positive" and np.any(x <= 0.0):
        raise GridOutsideDomain("grid contains non-positive points for a positive-state model")
    if isinstance(m, GbmInverseGarchRate) and np.any(x <= 0.0):
        raise GridOutsideDomain("inverse-GARCH rate state must stay positive")
    if mode == "exact":
        d1 = pair.phi.d1_ratio(x)
        d2 = pair.phi.d2_ratio(x)
    elif mode == "fd":
        d1, d2 = _scalar_ratios_fd(pair.phi, x)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    gen = 0.5 * coeffs.variance(x) * d2 + coeffs.drift(x) * d1 - coeffs.killing(x)
    resid = np.abs(gen + pair.lam) / (abs(pair.lam) + RESIDUAL_EPS)
    return GeneratorResidual(grid=x, max_abs_residual=float(np.max(resid)), mode=mode)


# ---------------------------------------------------------------------------
# Transformed-measure dynamics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QDrift:
    """Drift of the state under the transformed measure.

    ``drift(x)`` equals base drift plus the Girsanov shift
    variance * (phi'/phi); the diffusion coefficient is unchanged.
    """

    drift: Callable[[np.ndarray], np.ndarray]
    description: str


def q_dynamics(vp: ValidatedProblem, pair: Eigenpair) -> QDrift:
    """Drift of the state under the eigenfunction-transformed measure."""
    m = vp.model
    if isinstance(m, Quadratic):
        sol_u = pair.phi.u  # type: ignore[union-attr]
        sol_V = pair.phi.V  # type: ignore[union-attr]
        a = m.a
        const = m.b - a @ sol_u
        Fmat = m.Bmat - 2.0 * a @ sol_V

        def drift(y):
            y = np.atleast_2d(np.asarray(y, dtype=float))
            return const[None, :] + y @ Fmat.T

        return QDrift(drift=drift,
                      description="(b - a u) + (B - 2 a V) y, diffusion sigma unchanged")

    coeffs = generator_coefficients(vp)

    def drift(x):
        x = np.asarray(x, dtype=float)
        return coeffs.drift(x) + coeffs.variance(x) * pair.phi.d1_ratio(x)

    return QDrift(drift=drift,
                  description="base drift + variance * (phi'/phi), diffusion unchanged")
