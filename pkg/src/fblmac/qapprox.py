"""Piecewise linear and quadratic surrogates for the success probability.

Both surrogates are functions of the normalized margin ``chi`` alone and
admit closed-form maximizers of ``(k/n) * P(k)``, which gives a direct
packet-size rule ``k(n)``.  The constants are fitted by
:func:`fit_constants` against the exact Gaussian curve.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .errors import DomainError, NumericalError
from .fbl_model import ChannelParams, chi

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearApproxParams:
    delta0: float = 0.5
    delta1: float = 1.545

    def __post_init__(self):
        if not self.delta1 > 0:
            raise DomainError(f"delta1 must be positive, got {self.delta1}")


@dataclass(frozen=True)
class QuadApproxParams:
    """Quadratic surrogate constants; ``theta2`` is tied to ``theta1``."""

    theta0: float = 0.5
    theta1: float = 2.35
    theta2: float = field(init=False)

    def __post_init__(self):
        if not self.theta1 > 0:
            raise DomainError(f"theta1 must be positive, got {self.theta1}")
        object.__setattr__(self, "theta2", 0.5 / self.theta1**2)


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def _as_out(value):
    return float(value) if np.ndim(value) == 0 else value


# --------------------------------------------------------------------------
# surrogate curves


def linear_pc_chi(x, params: LinearApproxParams = LinearApproxParams()):
    x = np.asarray(x, dtype=float)
    ramp = x / (2.0 * params.delta1) + params.delta0
    out = np.where(x >= params.delta1, 1.0, np.where(x < -params.delta1, 0.0, ramp))
    return _as_out(out)


def quad_pc_chi(x, params: QuadApproxParams = QuadApproxParams()):
    x = np.asarray(x, dtype=float)
    t0, t1, t2 = params.theta0, params.theta1, params.theta2
    upper = t2 * x * (2.0 * t1 - x) + t0
    lower = t2 * x * (2.0 * t1 + x) + t0
    out = np.where(
        x >= t1, 1.0, np.where(x >= 0, upper, np.where(x > -t1, lower, 0.0))
    )
    return _as_out(out)


def linear_pc(b, n: int, channel: ChannelParams, params: LinearApproxParams = LinearApproxParams()):
    return linear_pc_chi(chi(b, n, channel), params)


def quad_pc(b, n: int, channel: ChannelParams, params: QuadApproxParams = QuadApproxParams()):
    return quad_pc_chi(chi(b, n, channel), params)


def linear_throughput(k, n, channel, params: LinearApproxParams = LinearApproxParams()):
    return _as_out(np.asarray(k, dtype=float) / n * linear_pc(k, n, channel, params))


def quad_throughput(k, n, channel, params: QuadApproxParams = QuadApproxParams()):
    return _as_out(np.asarray(k, dtype=float) / n * quad_pc(k, n, channel, params))


# --------------------------------------------------------------------------
# closed-form packet sizes


def linear_threshold_n(channel: ChannelParams, params: LinearApproxParams = LinearApproxParams()) -> float:
    """Blocklength above which the linear optimum sits on the saturation edge."""
    return 9.0 * params.delta1**2 * channel.dispersion / channel.capacity**2


def linear_opt_k_real(n: int, channel: ChannelParams, params: LinearApproxParams = LinearApproxParams()) -> float:
    c = n * channel.capacity
    s = math.sqrt(n * channel.dispersion)
    if n >= linear_threshold_n(channel, params):
        return c - params.delta1 * s
    return 0.5 * (c + params.delta1 * s)


def linear_opt_k(n: int, channel: ChannelParams, params: LinearApproxParams = LinearApproxParams()) -> int:
    if n < 1:
        raise DomainError(f"blocklength must be >= 1, got {n}")
    return max(1, round_half_away(linear_opt_k_real(n, channel, params)))


def quad_threshold_n(channel: ChannelParams, params: QuadApproxParams = QuadApproxParams()) -> float:
    return params.theta1**2 * channel.dispersion / (4.0 * channel.capacity**2)


@dataclass(frozen=True)
class QuadOptimum:
    k: int
    k_real: float
    branch: str          # "upper", "lower" or "search"
    used_fallback: bool


def quad_stationary_point(n: int, channel: ChannelParams,
                          params: QuadApproxParams = QuadApproxParams(),
                          form: str = "derived") -> tuple[float, str]:
    """Real-valued maximizer of ``k * quad_pc(k)`` and the branch it came from.

    ``form="derived"`` uses the roots of the cubic's derivative::

        upper (0 <= chi < theta1):  3k^2 - 4(c - t s)k + (c^2 - 2 t c s - t^2 s^2) = 0
        lower (chi < 0):            k = (c + t s) / 3

    with ``c = n*C``, ``s = sqrt(n*V)``, ``t = theta1``.  ``form="printed"``
    keeps the alternative closed form whose radicand has ``-7 t^2 V``
    and whose small-n branch reads ``(c - t s)/3``; it is kept for
    comparison only.  Returns ``nan`` when the radicand is negative.
    """
    t = params.theta1
    C, V = channel.capacity, channel.dispersion
    c = n * C
    s = math.sqrt(n * V)
    if form == "derived":
        radicand = n * C**2 + 7.0 * t**2 * V - 2.0 * t * C * s
        small = (c + t * s) / 3.0
    elif form == "printed":
        radicand = n * C**2 - 7.0 * t**2 * V - 2.0 * t * C * s
        small = (c - t * s) / 3.0
    else:
        raise DomainError(f"unknown form {form!r}")
    if n < quad_threshold_n(channel, params):
        return small, "lower"
    if radicand < 0:
        return math.nan, "upper"
    theta3 = math.sqrt(n) / 3.0 * math.sqrt(radicand)
    return 2.0 / 3.0 * (c - t * s) + theta3, "upper"


def _integer_argmax(values: np.ndarray) -> int:
    return int(np.argmax(values)) + 1


def quad_opt_detail(n: int, channel: ChannelParams,
                    params: QuadApproxParams = QuadApproxParams(),
                    form: str = "derived") -> QuadOptimum:
    if n < 1:
        raise DomainError(f"blocklength must be >= 1, got {n}")
    k_real, branch = quad_stationary_point(n, channel, params, form)
    if math.isnan(k_real):
        log.warning("negative radicand for n=%d snr=%g (%s form); using integer search",
                    n, channel.snr, form)
        kmax = max(1, math.ceil(n * channel.capacity + params.theta1 * math.sqrt(n * channel.dispersion)))
        k_grid = np.arange(1, kmax + 1)
        k = _integer_argmax(quad_throughput(k_grid, n, channel, params))
        return QuadOptimum(k, float(k), "search", True)
    return QuadOptimum(max(1, round_half_away(k_real)), k_real, branch, False)


def quad_opt_k(n: int, channel: ChannelParams,
               params: QuadApproxParams = QuadApproxParams(),
               form: str = "derived") -> int:
    return quad_opt_detail(n, channel, params, form).k


# --------------------------------------------------------------------------
# fitting


_NORMS = {
    "squared": lambda e: e * e,
    "absolute": np.abs,
}


def _gauss_cdf(x):
    return special.ndtr(x)


def fit_constants(family: str, target=_gauss_cdf, *, norm: str = "squared",
                  free_intercept: bool = False, window: float = 8.0, step: float = 1e-3):
    """Fit surrogate constants by minimizing an integrated error over ``chi``.

    The error ``approx(chi) - target(chi)`` is integrated over
    ``[-window, window]`` with the composite trapezoid rule.  ``norm`` is
    ``"squared"`` (integral of the squared error) or ``"absolute"``.  The
    squared norm reproduces the standard constants (1.545 and 2.35); the
    absolute norm lands at about 1.4875 and 2.331.

    The quadratic intercept is pinned to 0.5 by odd symmetry; the linear
    intercept is pinned unless ``free_intercept`` is set.
    """
    if family not in ("linear", "quadratic"):
        raise DomainError(f"family must be 'linear' or 'quadratic', got {family!r}")
    if norm not in _NORMS:
        raise DomainError(f"norm must be one of {sorted(_NORMS)}, got {norm!r}")
    if step > 1e-3:
        raise DomainError("quadrature step must be <= 1e-3")
    x = np.linspace(-window, window, int(round(2 * window / step)) + 1)
    ref = target(x)
    err = _NORMS[norm]

    def cost(approx):
        value = integrate.trapezoid(err(approx - ref), x)
        if not math.isfinite(value):
            raise NumericalError("non-finite error integral")
        return value

    if family == "quadratic":
        res = optimize.minimize_scalar(
            lambda t1: cost(quad_pc_chi(x, QuadApproxParams(0.5, t1))),
            bounds=(0.5, window / 2), method="bounded", options={"xatol": 1e-9},
        )
        if not res.success:
            raise NumericalError(f"theta1 search failed: {res.message}")
        return QuadApproxParams(0.5, float(res.x))

    if not free_intercept:
        res = optimize.minimize_scalar(
            lambda d1: cost(linear_pc_chi(x, LinearApproxParams(0.5, d1))),
            bounds=(0.25, window / 2), method="bounded", options={"xatol": 1e-9},
        )
        if not res.success:
            raise NumericalError(f"delta1 search failed: {res.message}")
        return LinearApproxParams(0.5, float(res.x))

    def cost2(p):
        if p[1] <= 0:
            return np.inf
        return cost(linear_pc_chi(x, LinearApproxParams(p[0], p[1])))

    res = optimize.minimize(cost2, x0=[0.4, 1.2], method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000})
    if not res.success:
        raise NumericalError(f"(delta0, delta1) search failed: {res.message}")
    return LinearApproxParams(float(res.x[0]), float(res.x[1]))
