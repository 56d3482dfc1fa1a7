"""Model catalog: reference-asset dynamics, preferences, and validation.

The library prices a leveraged fund on a reference asset ``X`` with leverage
ratio ``beta``: the fund holds ``beta`` times its value in the reference and
finances the rest at the short rate.  Everything downstream (eigenvalues,
growth rates, Monte Carlo) dispatches on the tagged union of model variants
defined here.

Units are per year throughout; volatilities are per square-root year.  The
initial conditions are fixed at ``X_0 = L_0 = 1`` (and ``Y_0 = 0`` for the
quadratic state), so growth rates never depend on an arbitrary price scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import ClassVar, Union

import numpy as np

from .errors import (
    ConfigError,
    ExtraneousRate,
    MissingRate,
    ParameterViolation,
)

__all__ = [
    "Preference",
    "Leverage",
    "ConstantRate",
    "Gbm",
    "Garch",
    "InverseGarch",
    "ExtendedCir",
    "ThreeHalves",
    "HestonSV",
    "ThreeHalvesSV",
    "GbmVasicek",
    "GbmInverseGarchRate",
    "Quadratic",
    "ModelSpec",
    "Problem",
    "ValidatedProblem",
    "validate",
    "LogPriceRecipe",
    "letf_log_price",
    "load_problem",
    "problem_to_config",
    "MODEL_KINDS",
]

X0 = 1.0  # initial reference price (and initial fund value)


def _require(cond: bool, field: str, constraint: str, detail: str,
             relax: bool, warnings: list[str]) -> None:
    """Raise ParameterViolation, or record a warning when relax is set."""
    if cond:
        return
    if relax:
        warnings.append(f"{field}: relaxed check failed: {constraint} ({detail})")
    else:
        raise ParameterViolation(field, constraint, f"{constraint} fails: {detail}")


@dataclass(frozen=True)
class Preference:
    """Power-utility preference u(w) = w**alpha with alpha in (0, 1].

    Relative risk aversion is 1 - alpha, so alpha = 1 is the risk-neutral
    (expected-return) case.
    """

    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ParameterViolation("alpha", "0 < alpha <= 1", f"got {self.alpha}")

    @property
    def risk_aversion(self) -> float:
        return 1.0 - self.alpha


@dataclass(frozen=True)
class Leverage:
    """Leverage ratio of the fund.  Any finite real is accepted here.

    Formula-specific domain restrictions (some exponents need
    beta * (beta - 1) >= 0, i.e. beta outside (0, 1)) are enforced by the
    consuming module, because several variants are valid for every beta.
    """

    beta: float

    def __post_init__(self):
        if not math.isfinite(self.beta):
            raise ParameterViolation("beta", "finite real", f"got {self.beta}")


@dataclass(frozen=True)
class ConstantRate:
    """Constant short rate, per year.  Strictly positive unless relaxed."""

    r: float

    def check(self, relax: bool, warnings: list[str]) -> None:
        _require(self.r > 0.0, "r", "r > 0", f"got {self.r}", relax, warnings)
        if relax and self.r < 0.0:
            warnings.append("r < 0 accepted in relaxed mode")


# ---------------------------------------------------------------------------
# Model variants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gbm:
    """Geometric Brownian motion: dX = mu X dt + sigma X dB."""

    kind: ClassVar[str] = "gbm"
    mu: float
    sigma: float

    def check(self, relax: bool, warnings: list[str]) -> None:
        _require(self.sigma != 0.0, "sigma", "sigma != 0", f"got {self.sigma}",
                 relax, warnings)


@dataclass(frozen=True)
class Garch:
    """GARCH diffusion: dX = (theta - a X) dt + sigma X dB, all parameters > 0."""

    kind: ClassVar[str] = "garch"
    theta: float
    a: float
    sigma: float

    def check(self, relax: bool, warnings: list[str]) -> None:
        for name in ("theta", "a", "sigma"):
            v = getattr(self, name)
            _require(v > 0.0, name, f"{name} > 0", f"got {v}", relax, warnings)


@dataclass(frozen=True)
class InverseGarch:
    """Inverse GARCH diffusion: dX = (theta - a X) X dt + sigma X dB.

    Requires a, sigma > 0 and theta > sigma**2 (so that 1/X is a GARCH
    diffusion with a positive reversion speed).
    """

    kind: ClassVar[str] = "inverse_garch"
    theta: float
    a: float
    sigma: float

    def check(self, relax: bool, warnings: list[str]) -> None:
        _require(self.a > 0.0, "a", "a > 0", f"got {self.a}", relax, warnings)
        _require(self.sigma > 0.0, "sigma", "sigma > 0", f"got {self.sigma}",
                 relax, warnings)
        _require(self.theta > self.sigma ** 2, "theta", "theta > sigma^2",
                 f"{self.theta} <= {self.sigma ** 2}", relax, warnings)


@dataclass(frozen=True)
class ExtendedCir:
    """Extended CIR: dX = (theta + mu X) dt + sigma sqrt(X) dB.

    Transient (drifts to +infinity) for mu > 0.  Requires mu, sigma > 0 and
    theta >= sigma**2, which also keeps 0 unattainable.
    """

    kind: ClassVar[str] = "extended_cir"
    theta: float
    mu: float
    sigma: float

    def check(self, relax: bool, warnings: list[str]) -> None:
        _require(self.mu > 0.0, "mu", "mu > 0", f"got {self.mu}", relax, warnings)
        _require(self.sigma > 0.0, "sigma", "sigma > 0", f"got {self.sigma}",
                 relax, warnings)
        _require(self.theta >= self.sigma ** 2, "theta", "theta >= sigma^2",
                 f"{self.theta} < {self.sigma ** 2}", relax, warnings)


@dataclass(frozen=True)
class ThreeHalves:
    """3/2 model: dX = (theta - a X) X dt + sigma X**(3/2) dB, parameters > 0."""

    kind: ClassVar[str] = "three_halves"
    theta: float
    a: float
    sigma: float

    def check(self, relax: bool, warnings: list[str]) -> None:
        for name in ("theta", "a", "sigma"):
            v = getattr(self, name)
            _require(v > 0.0, name, f"{name} > 0", f"got {v}", relax, warnings)


@dataclass(frozen=True)
class HestonSV:
    """Heston stochastic volatility.

    dX = mu X dt + sqrt(v) X dB,  dv = (theta - a v) dt + delta sqrt(v) dZ,
    corr(B, Z) = rho.  Requires mu, theta, a, delta > 0, rho in [-1, 1],
    v0 > 0, and the Feller condition 2 theta > delta**2.
    """

    kind: ClassVar[str] = "heston_sv"
    mu: float
    theta: float
    a: float
    delta: float
    rho: float
    v0: float

    def check(self, relax: bool, warnings: list[str]) -> None:
        for name in ("mu", "theta", "a", "delta", "v0"):
            v = getattr(self, name)
            _require(v > 0.0, name, f"{name} > 0", f"got {v}", relax, warnings)
        _require(-1.0 <= self.rho <= 1.0, "rho", "-1 <= rho <= 1",
                 f"got {self.rho}", relax, warnings)
        _require(2.0 * self.theta > self.delta ** 2, "delta",
                 "2*theta > delta^2",
                 f"{2.0 * self.theta} <= {self.delta ** 2}", relax, warnings)


@dataclass(frozen=True)
class ThreeHalvesSV:
    """3/2 stochastic volatility: dv = (theta - a v) v dt + delta v**(3/2) dZ."""

    kind: ClassVar[str] = "three_halves_sv"
    mu: float
    theta: float
    a: float
    delta: float
    rho: float
    v0: float

    def check(self, relax: bool, warnings: list[str]) -> None:
        for name in ("theta", "a", "delta", "v0"):
            v = getattr(self, name)
            _require(v > 0.0, name, f"{name} > 0", f"got {v}", relax, warnings)
        _require(-1.0 <= self.rho <= 1.0, "rho", "-1 <= rho <= 1",
                 f"got {self.rho}", relax, warnings)


@dataclass(frozen=True)
class GbmVasicek:
    """GBM reference with a Vasicek (Gaussian OU) short rate.

    dX = mu X dt + sigma X dB,  dr = (theta - a r) dt + delta dZ,
    corr(B, Z) = rho.  The initial rate r0 does not enter the long-term
    growth rate; it matters only for finite-horizon simulation.
    """

    kind: ClassVar[str] = "gbm_vasicek"
    mu: float
    sigma: float
    theta: float
    a: float
    delta: float
    rho: float
    r0: float

    def check(self, relax: bool, warnings: list[str]) -> None:
        for name in ("sigma", "theta", "a", "delta"):
            v = getattr(self, name)
            _require(v > 0.0, name, f"{name} > 0", f"got {v}", relax, warnings)
        _require(-1.0 <= self.rho <= 1.0, "rho", "-1 <= rho <= 1",
                 f"got {self.rho}", relax, warnings)


@dataclass(frozen=True)
class GbmInverseGarchRate:
    """GBM reference with an inverse-GARCH short rate.

    dX = mu X dt + sigma X dB,  dr = (theta - a r) r dt + delta r dZ,
    corr(B, Z) = rho.  Requires mu, a, delta > 0 and theta > delta**2.
    """

    kind: ClassVar[str] = "gbm_inverse_garch_rate"
    mu: float
    sigma: float
    theta: float
    a: float
    delta: float
    rho: float
    r0: float

    def check(self, relax: bool, warnings: list[str]) -> None:
        for name in ("mu", "a", "delta"):
            v = getattr(self, name)
            _require(v > 0.0, name, f"{name} > 0", f"got {v}", relax, warnings)
        _require(self.sigma > 0.0, "sigma", "sigma > 0", f"got {self.sigma}",
                 relax, warnings)
        _require(self.theta > self.delta ** 2, "theta", "theta > delta^2",
                 f"{self.theta} <= {self.delta ** 2}", relax, warnings)
        _require(self.r0 > 0.0, "r0", "r0 > 0", f"got {self.r0}", relax, warnings)
        _require(-1.0 <= self.rho <= 1.0, "rho", "-1 <= rho <= 1",
                 f"got {self.rho}", relax, warnings)


@dataclass(frozen=True, eq=False)
class Quadratic:
    """Quadratic model X = exp(|Y|^2) for a d-dimensional OU state Y.

    dY = (b + B Y) dt + sigma dW with Y_0 = 0; sigma must be non-singular so
    that a = sigma sigma^T is strictly positive definite.
    """

    kind: ClassVar[str] = "quadratic"
    b: np.ndarray
    Bmat: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", np.atleast_1d(np.asarray(self.b, dtype=float)))
        object.__setattr__(self, "Bmat", np.atleast_2d(np.asarray(self.Bmat, dtype=float)))
        object.__setattr__(self, "sigma", np.atleast_2d(np.asarray(self.sigma, dtype=float)))

    @property
    def d(self) -> int:
        return self.b.shape[0]

    @property
    def a(self) -> np.ndarray:
        """Diffusion matrix a = sigma sigma^T."""
        return self.sigma @ self.sigma.T

    def check(self, relax: bool, warnings: list[str]) -> None:
        d = self.d
        if self.Bmat.shape != (d, d) or self.sigma.shape != (d, d):
            raise ParameterViolation("Bmat/sigma", "d x d matrices",
                                     f"b has length {d}, Bmat {self.Bmat.shape}, "
                                     f"sigma {self.sigma.shape}")
        eig_min = float(np.linalg.eigvalsh(self.a).min())
        _require(eig_min > 0.0, "sigma", "sigma*sigma^T strictly positive definite",
                 f"min eigenvalue {eig_min}", relax, warnings)

    def __eq__(self, other):
        if not isinstance(other, Quadratic):
            return NotImplemented
        return (np.array_equal(self.b, other.b)
                and np.array_equal(self.Bmat, other.Bmat)
                and np.array_equal(self.sigma, other.sigma))


ModelSpec = Union[
    Gbm, Garch, InverseGarch, ExtendedCir, ThreeHalves,
    HestonSV, ThreeHalvesSV, GbmVasicek, GbmInverseGarchRate, Quadratic,
]

MODEL_KINDS: dict[str, type] = {
    cls.kind: cls
    for cls in (Gbm, Garch, InverseGarch, ExtendedCir, ThreeHalves,
                HestonSV, ThreeHalvesSV, GbmVasicek, GbmInverseGarchRate,
                Quadratic)
}

STOCHASTIC_RATE_KINDS = frozenset({"gbm_vasicek", "gbm_inverse_garch_rate"})


def has_stochastic_rate(model: ModelSpec) -> bool:
    return model.kind in STOCHASTIC_RATE_KINDS


# ---------------------------------------------------------------------------
# Problem assembly and validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Problem:
    """A fully specified growth-rate problem.

    ``rate`` must be present exactly when the model does not carry its own
    stochastic short rate.
    """

    model: ModelSpec
    pref: Preference
    leverage: Leverage
    rate: ConstantRate | None = None


@dataclass(frozen=True)
class ValidatedProblem:
    """A problem certified against every variant invariant.

    All downstream modules require this wrapper; construct it with
    :func:`validate`.  Instances are immutable and safe to share across
    threads.
    """

    problem: Problem
    relaxed: bool = False
    warnings: tuple[str, ...] = ()

    @property
    def model(self) -> ModelSpec:
        return self.problem.model

    @property
    def alpha(self) -> float:
        return self.problem.pref.alpha

    @property
    def beta(self) -> float:
        return self.problem.leverage.beta

    @property
    def r(self) -> float | None:
        return None if self.problem.rate is None else self.problem.rate.r

    def with_beta(self, beta: float) -> "ValidatedProblem":
        """Same certified problem at a different leverage ratio.

        Leverage carries no parameter bound of its own, so revalidation is
        not needed.
        """
        p = Problem(self.problem.model, self.problem.pref, Leverage(float(beta)),
                    self.problem.rate)
        return ValidatedProblem(p, self.relaxed, self.warnings)


def validate(problem: Problem | ValidatedProblem, relax: bool = False) -> ValidatedProblem:
    """Certify a problem against every variant invariant.

    Parameters
    ----------
    problem : Problem or ValidatedProblem
        Passing an already validated problem is a no-op (validation is
        idempotent).
    relax : bool
        Downgrade parameter-bound violations to warnings.  Structural errors
        (missing/extraneous rate, shape mismatches) still raise.

    Raises
    ------
    ParameterViolation, MissingRate, ExtraneousRate
    """
    if isinstance(problem, ValidatedProblem):
        if relax and not problem.relaxed:
            return validate(problem.problem, relax=True)
        return problem

    model = problem.model
    if has_stochastic_rate(model):
        if problem.rate is not None:
            raise ExtraneousRate(
                f"model {model.kind!r} carries its own short rate; drop 'r'")
    else:
        if problem.rate is None:
            raise MissingRate(f"model {model.kind!r} needs a constant short rate 'r'")

    warnings: list[str] = []
    model.check(relax, warnings)
    if problem.rate is not None:
        problem.rate.check(relax, warnings)
    return ValidatedProblem(problem, relaxed=relax, warnings=tuple(warnings))


# ---------------------------------------------------------------------------
# Fund log-price decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogPriceRecipe:
    """Path functionals whose combination gives the fund's log price.

    For the scalar-reference variants,

        log L_t = state_coeff * log X_t
                  + rate_integral_coeff * int_0^t r_s ds
                  + variance_integral_coeff * int_0^t |sigma_s|^2 ds

    where sigma_s is the instantaneous relative volatility of X.  For the
    quadratic variant the state functional is |Y_t|^2 instead of log X_t and
    the variance functional is int |sigma^T Y_u|^2 du, with the coefficient
    -2 beta (beta - 1) absorbing the factor-4 relation
    |sigma_s|^2 = 4 |sigma^T Y_s|^2.
    """

    state_functional: str
    state_coeff: float
    rate_integral_coeff: float
    variance_functional: str
    variance_integral_coeff: float
    constant_rate: float | None

    def evaluate(self, state_value, rate_integral, variance_integral):
        """Combine accumulated functionals into log L_t (vectorized)."""
        return (self.state_coeff * state_value
                + self.rate_integral_coeff * rate_integral
                + self.variance_integral_coeff * variance_integral)


def letf_log_price(model: ModelSpec, beta: float,
                   rate: ConstantRate | None = None) -> LogPriceRecipe:
    """Exact decomposition of the fund's log price into path functionals.

    Pure bookkeeping: the returned recipe tells a simulator exactly which
    accumulators to maintain.  At beta = 1 every correction term vanishes and
    the fund tracks the reference; at beta = 0 with a constant rate the fund
    is the money-market account, log L_t = r t.
    """
    beta = float(beta)
    r = None if rate is None else rate.r
    if isinstance(model, Quadratic):
        return LogPriceRecipe(
            state_functional="squared_state |Y_t|^2",
            state_coeff=beta,
            rate_integral_coeff=-(beta - 1.0),
            variance_functional="int |sigma^T Y_u|^2 du",
            variance_integral_coeff=-2.0 * beta * (beta - 1.0),
            constant_rate=r,
        )
    return LogPriceRecipe(
        state_functional="log X_t",
        state_coeff=beta,
        rate_integral_coeff=-(beta - 1.0),
        variance_functional="int |sigma_s|^2 ds",
        variance_integral_coeff=-0.5 * beta * (beta - 1.0),
        constant_rate=r,
    )


# ---------------------------------------------------------------------------
# JSON configuration
# ---------------------------------------------------------------------------

_TOP_LEVEL_KEYS = {"model", "alpha", "beta", "r"}


def _model_from_config(obj: dict) -> ModelSpec:
    if not isinstance(obj, dict):
        raise ConfigError("'model' must be an object")
    if "kind" not in obj:
        raise ConfigError("'model' needs a 'kind' field")
    kind = obj["kind"]
    cls = MODEL_KINDS.get(kind)
    if cls is None:
        raise ConfigError(
            f"unknown model kind {kind!r}; expected one of {sorted(MODEL_KINDS)}")
    field_names = [f.name for f in fields(cls)]
    allowed = set(field_names) | {"kind"}
    if cls is Quadratic:
        allowed.add("d")  # optional, cross-checked below
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in model config: {sorted(unknown)}")
    missing = [n for n in field_names if n not in obj]
    if missing:
        raise ConfigError(f"model {kind!r} is missing fields: {missing}")
    kwargs = {n: obj[n] for n in field_names}
    if cls is Quadratic:
        model = Quadratic(**kwargs)
        if "d" in obj and int(obj["d"]) != model.d:
            raise ConfigError(
                f"declared d={obj['d']} but b has length {model.d}")
        return model
    return cls(**{n: float(kwargs[n]) for n in field_names})


def load_problem(source: dict | str | Path, relax: bool = False) -> ValidatedProblem:
    """Build and validate a problem from a JSON document or parsed dict.

    The document has one top-level object::

        {"model": {"kind": "<kind>", ...params}, "alpha": a, "beta": b, "r": r}

    ``r`` is required for constant-rate models and forbidden for the
    stochastic-rate variants.  Unknown keys are errors.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        doc = source
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(doc) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    for key in ("model", "alpha", "beta"):
        if key not in doc:
            raise ConfigError(f"missing required key {key!r}")
    model = _model_from_config(doc["model"])
    pref = Preference(float(doc["alpha"]))
    lev = Leverage(float(doc["beta"]))
    rate = ConstantRate(float(doc["r"])) if "r" in doc else None
    return validate(Problem(model, pref, lev, rate), relax=relax)


def problem_to_config(vp: ValidatedProblem) -> dict:
    """Inverse of :func:`load_problem`, for manifests and round-trips."""
    model = vp.model
    if isinstance(model, Quadratic):
        mdoc = {"kind": model.kind, "b": model.b.tolist(),
                "Bmat": model.Bmat.tolist(), "sigma": model.sigma.tolist()}
    else:
        mdoc = {"kind": model.kind}
        mdoc.update({f.name: getattr(model, f.name) for f in fields(model)})
    doc = {"model": mdoc, "alpha": vp.alpha, "beta": vp.beta}
    if vp.r is not None:
        doc["r"] = vp.r
    return doc
