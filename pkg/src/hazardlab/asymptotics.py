"""Catalog of asymptotic regimes: rate function, centering/trend and
limiting variance for the cumulative hazard, path-second moment and
path-variance of each worked (kernel, intensity) pair.

The catalog is static data plus moment plugging, not a derivation
engine; pairs outside it raise NotCatalogedError (linear functional) or
return Unsupported (quadratic functionals, where monotone-type kernels
genuinely fail the required negligibility conditions).

The quadratic-functional variances are assembled from the symmetric-
kernel norms, i.e. with the full product-space L2 norm of the bivariate
kernel and the location integral of Q_T(x, .) taken over the whole
window.  Each constant is pinned by quadrature and Monte Carlo tests.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Union

from . import crm, kernels

__all__ = [
    "Functional", "Power", "PowerLog", "RateFunction",
    "PowerTrend", "ConstantCentering", "MonteCarloMean", "CenteringRule",
    "RegimeSpec", "Unsupported", "NotCatalogedError",
    "regime_cumhaz", "regime_path2nd", "regime_pathvar", "regime",
    "catalog_rows", "default_catalog_pairs",
]


class NotCatalogedError(Exception):
    """The (kernel, intensity) pair has no cataloged regime."""


class Functional(enum.Enum):
    CUMULATIVE_HAZARD = "cumulative_hazard"
    PATH_SECOND_MOMENT = "path_second_moment"
    PATH_VARIANCE = "path_variance"


@dataclass(frozen=True)
class Power:
    """C(T) = T^p."""
    p: float

    def __call__(self, T: float) -> float:
        return T ** self.p

    def label(self) -> str:
        return f"T^{self.p:g}"


@dataclass(frozen=True)
class PowerLog:
    """C(T) = T^p (log T)^q."""
    p: float
    q: float

    def __call__(self, T: float) -> float:
        return T ** self.p * math.log(T) ** self.q

    def label(self) -> str:
        return f"T^{self.p:g}*logT^{self.q:g}"


RateFunction = Union[Power, PowerLog]


@dataclass(frozen=True)
class PowerTrend:
    """Centering tau(T) = coef * T^power."""
    coef: float
    power: float

    def __call__(self, T: float) -> float:
        return self.coef * T ** self.power

    def label(self) -> str:
        return f"{self.coef:g}*T^{self.power:g}"


@dataclass(frozen=True)
class ConstantCentering:
    value: float

    def __call__(self, T: float) -> float:
        return self.value

    def label(self) -> str:
        return f"{self.value:g}"


@dataclass(frozen=True)
class MonteCarloMean:
    """Center at the deterministic quadrature value of I_1(T); used where
    no closed trend constant is available."""

    def label(self) -> str:
        return "I1(T) by quadrature"


CenteringRule = Union[PowerTrend, ConstantCentering, MonteCarloMean]


@dataclass(frozen=True)
class RegimeSpec:
    functional: Functional
    rate: RateFunction
    centering: CenteringRule
    limit_variance: float
    delta: Optional[float] = None
    sigma0_sq: Optional[float] = None
    sigma1_sq: Optional[float] = None
    sigma2_sq: Optional[float] = None
    sigma3_sq: Optional[float] = None

    def __post_init__(self):
        if not (self.limit_variance > 0):
            raise ValueError("limit_variance must be > 0")
        if self.functional is Functional.PATH_VARIANCE and self.delta is None:
            raise ValueError("path-variance regimes carry delta")


@dataclass(frozen=True)
class Unsupported:
    """A pair for which the CLT hypotheses provably fail (or are not
    cataloged); `reason` says why."""
    reason: str


_MONOTONE_REASON = (
    "monotone-growth kernel: the normalized contraction quantity converges to a "
    "positive constant and the single-integral condition quantities diverge, so no "
    "rate function satisfies the quadratic-functional hypotheses"
)


def _sqrt_family_slope(fn: crm.PositiveFunction) -> Optional[float]:
    # coefficient b with fn(x) ~ b*sqrt(x) as x -> infinity
    if isinstance(fn, crm.AffineSqrt):
        return fn.b
    if isinstance(fn, crm.IndicatorSqrt):
        return 1.0
    return None


def _moments(intensity, upto=4):
    return [crm.moment(intensity, i) for i in range(1, upto + 1)]


def regime_cumhaz(kernel: kernels.Kernel, intensity: crm.JumpIntensity) -> RegimeSpec:
    """Theorem-level regime of C0(T) * [H(T) - trend(T)] -> N(0, sigma0^2)."""
    F = Functional.CUMULATIVE_HAZARD
    if crm.is_homogeneous(intensity):
        k1, k2 = crm.moment(intensity, 1), crm.moment(intensity, 2)
        if isinstance(kernel, kernels.Rectangular):
            tau = kernel.tau
            var = 4.0 * k2 * tau ** 2
            return RegimeSpec(F, Power(-0.5), PowerTrend(2.0 * tau * k1, 1.0), var, sigma0_sq=var)
        if isinstance(kernel, kernels.DykstraLaud):
            var = k2 / 3.0
            return RegimeSpec(F, Power(-1.5), PowerTrend(0.5 * k1, 2.0), var, sigma0_sq=var)
        if isinstance(kernel, kernels.OrnsteinUhlenbeck):
            kap = kernel.kappa
            var = 2.0 * k2 / kap
            return RegimeSpec(F, Power(-0.5), PowerTrend(k1 * math.sqrt(2.0 / kap), 1.0),
                              var, sigma0_sq=var)
        if isinstance(kernel, kernels.UShaped):
            var = k2 / 3.0
            return RegimeSpec(F, Power(-1.5), PowerTrend(0.5 * k1, 2.0), var, sigma0_sq=var)
        raise NotCatalogedError(f"no cumulative-hazard regime for {kernel.label()}")
    # non-homogeneous worked cases: sqrt-growth profiles with DL / rectangular
    if isinstance(intensity, crm.ExtendedGamma):
        b = _sqrt_family_slope(intensity.beta_fn)
        if b is not None:
            if isinstance(kernel, kernels.DykstraLaud):
                var = 1.0 / b ** 2      # K2(x) ~ 1/(b^2 x), I2 ~ var * T^2 log T
                return RegimeSpec(F, PowerLog(-1.0, -0.5), MonteCarloMean(), var, sigma0_sq=var)
            if isinstance(kernel, kernels.Rectangular):
                var = 4.0 * kernel.tau ** 2 / b ** 2
                return RegimeSpec(F, PowerLog(0.0, -0.5), MonteCarloMean(), var, sigma0_sq=var)
    if isinstance(intensity, crm.Beta):
        b = _sqrt_family_slope(intensity.c_fn)
        if b is not None:
            # first jump moment is exactly 1 at every location for the beta family
            if isinstance(kernel, kernels.DykstraLaud):
                var = 16.0 / (15.0 * b)
                return RegimeSpec(F, Power(-1.25), PowerTrend(0.5, 2.0), var, sigma0_sq=var)
            if isinstance(kernel, kernels.Rectangular):
                tau = kernel.tau
                var = 8.0 * tau ** 2 / b
                return RegimeSpec(F, Power(-0.25), PowerTrend(2.0 * tau, 1.0), var, sigma0_sq=var)
    raise NotCatalogedError(
        f"no cumulative-hazard regime cataloged for ({kernel.label()}, {intensity.label()}); "
        "the numeric condition checker can still be run")


def regime_path2nd(kernel: kernels.Kernel,
                   intensity: crm.JumpIntensity) -> Union[RegimeSpec, Unsupported]:
    """sqrt(T) * [path-second-moment - centering] -> N(0, sigma1^2 + sigma2^2)."""
    F = Functional.PATH_SECOND_MOMENT
    if isinstance(kernel, (kernels.DykstraLaud, kernels.UShaped)):
        return Unsupported(_MONOTONE_REASON)
    if not crm.is_homogeneous(intensity):
        return Unsupported(
            "non-homogeneous intensity: the limiting variance depends on the whole "
            "profile; bracket with constant-parameter envelopes or run check-conditions")
    k1, k2, k3, k4 = _moments(intensity)
    if isinstance(kernel, kernels.Rectangular):
        tau = kernel.tau
        s1 = 32.0 * tau ** 3 * k2 ** 2 / 3.0
        s2 = 4.0 * tau ** 2 * k4 + 32.0 * tau ** 3 * k3 * k1 + 64.0 * tau ** 4 * k2 * k1 ** 2
        center = 2.0 * tau * k2 + 4.0 * tau ** 2 * k1 ** 2
    else:
        kap = kernel.kappa
        s1 = 2.0 * k2 ** 2 / kap
        s2 = k4 + 8.0 * k3 * k1 / kap + 16.0 * k2 * k1 ** 2 / kap ** 2
        center = k2 + 2.0 * k1 ** 2 / kap
    return RegimeSpec(F, Power(0.5), ConstantCentering(center), s1 + s2,
                      sigma1_sq=s1, sigma2_sq=s2)


def regime_pathvar(kernel: kernels.Kernel,
                   intensity: crm.JumpIntensity) -> Union[RegimeSpec, Unsupported]:
    """sqrt(T) * [path-variance - centering] -> N(0, sigma1^2 + sigma3^2)."""
    F = Functional.PATH_VARIANCE
    if isinstance(kernel, (kernels.DykstraLaud, kernels.UShaped)):
        return Unsupported(_MONOTONE_REASON)
    if not crm.is_homogeneous(intensity):
        return Unsupported(
            "non-homogeneous intensity: the limiting variance depends on the whole "
            "profile; bracket with constant-parameter envelopes or run check-conditions")
    k1, k2, k3, k4 = _moments(intensity)
    if isinstance(kernel, kernels.Rectangular):
        tau = kernel.tau
        s1 = 32.0 * tau ** 3 * k2 ** 2 / 3.0
        s3 = 4.0 * tau ** 2 * k4      # the delta * C0 * k0 term cancels the cross terms
        delta = 4.0 * tau * k1
        center = 2.0 * tau * k2
    else:
        kap = kernel.kappa
        s1 = 2.0 * k2 ** 2 / kap
        s3 = k4
        delta = 2.0 ** 1.5 * k1 / math.sqrt(kap)
        center = k2
    return RegimeSpec(F, Power(0.5), ConstantCentering(center), s1 + s3,
                      delta=delta, sigma1_sq=s1, sigma3_sq=s3)


def regime(kernel: kernels.Kernel, intensity: crm.JumpIntensity,
           functional: Functional) -> Union[RegimeSpec, Unsupported]:
    if functional is Functional.CUMULATIVE_HAZARD:
        return regime_cumhaz(kernel, intensity)
    if functional is Functional.PATH_SECOND_MOMENT:
        return regime_path2nd(kernel, intensity)
    return regime_pathvar(kernel, intensity)


# ---------------------------------------------------------------------------
# catalog rendering
# ---------------------------------------------------------------------------

def default_catalog_pairs():
    """Reference parameterizations used by the `regimes` catalog dump."""
    ks = [kernels.Rectangular(1.0), kernels.DykstraLaud(),
          kernels.OrnsteinUhlenbeck(1.0), kernels.UShaped(2.0)]
    homog = [crm.GeneralizedGamma(0.5, 1.0),
             crm.ExtendedGamma(crm.Constant(1.0)),
             crm.Beta(crm.Constant(1.0))]
    nonhomog = [crm.ExtendedGamma(crm.AffineSqrt(1.0, 1.0)),
                crm.Beta(crm.IndicatorSqrt(1.0))]
    pairs = [(k, i) for k in ks for i in homog]
    pairs += [(k, i) for k in (kernels.DykstraLaud(), kernels.Rectangular(1.0))
              for i in nonhomog]
    return pairs


def catalog_rows(pairs=None):
    """Rows (dicts) for the regimes table: kernel, crm, functional, rate,
    trend, variance, delta, supported."""
    rows = []
    for kernel, intensity in (pairs or default_catalog_pairs()):
        for functional in Functional:
            try:
                spec = regime(kernel, intensity, functional)
            except NotCatalogedError as exc:
                spec = Unsupported(str(exc))
            row = {"kernel": kernel.label(), "crm": intensity.label(),
                   "functional": functional.value}
            if isinstance(spec, Unsupported):
                row.update(rate="", trend="", variance="", delta="",
                           supported="no", reason=spec.reason)
            else:
                row.update(rate=spec.rate.label(), trend=spec.centering.label(),
                           variance=f"{spec.limit_variance:.12g}",
                           delta="" if spec.delta is None else f"{spec.delta:.12g}",
                           supported="yes", reason="")
            rows.append(row)
    return rows
