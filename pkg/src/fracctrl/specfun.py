"""Gamma, two-parameter Mittag-Leffler and Mainardi (M-Wright) functions.

Everything here is real-valued and restricted to the arguments the solution
operators need: Mittag-Leffler at non-positive arguments, the Mainardi
density on the positive half-line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

__all__ = [
    "MLParams",
    "SeriesConvergenceError",
    "gamma_fn",
    "mittag_leffler",
    "mittag_leffler_array",
    "mainardi_series",
    "mainardi_density",
    "stable_density",
    "mainardi_transform",
]

# Power series is used for |z| <= SERIES_RADIUS (no cancellation to speak of).
SERIES_RADIUS = 1.0
# Asymptotic expansion is used once |z|**(1/alpha) >= ASYMPTOTIC_SCALE; the
# optimally truncated remainder is then O(exp(-ASYMPTOTIC_SCALE)).
ASYMPTOTIC_SCALE = 40.0
# Range of the power series for 1 < alpha <= 2 (no other path is shipped there).
WIDE_ALPHA_RADIUS = 5.0


class SeriesConvergenceError(ArithmeticError):
    """A truncated series did not reach the requested accuracy."""


@dataclass(frozen=True)
class MLParams:
    """Parameters of E_{alpha,beta}.

    ``alpha`` in (1, 2] is accepted for small arguments only (power series);
    the artifact itself only uses alpha in (0, 1].
    """

    alpha: float
    beta: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must lie in (0, 1] (or (1, 2] on |z| <= 5): {self.alpha}")
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive: {self.beta}")


def gamma_fn(x: float) -> float:
    """Gamma function for positive real arguments."""
    if not x > 0.0:
        raise ValueError(f"gamma_fn needs x > 0, got {x}")
    return math.gamma(x)


def mittag_leffler(p: MLParams, z: float) -> float:
    """Scalar E_{alpha,beta}(z) for z <= 0."""
    return float(mittag_leffler_array(p.alpha, p.beta, np.array([z], dtype=float))[0])


def mittag_leffler_array(alpha: float, beta: float, z) -> np.ndarray:
    """Vectorized E_{alpha,beta}(z) on non-positive real arguments.

    Regions (alpha < 1): power series for |z| <= 1, the real-line integral
    representation in between, the asymptotic expansion once
    |z|**(1/alpha) >= 40.  Absolute accuracy is about 1e-14.
    """
    p = MLParams(alpha, beta)
    z = np.asarray(z, dtype=float)
    if np.any(z > 0.0) or not np.all(np.isfinite(z)):
        raise ValueError("mittag_leffler is only defined here for finite z <= 0")
    shape = z.shape
    z = z.ravel()
    out = np.empty_like(z)
    x = -z

    if p.alpha > 1.0:
        if np.any(x > WIDE_ALPHA_RADIUS):
            raise ValueError("alpha > 1 is only supported for |z| <= 5")
        out[:] = _ml_series(p.alpha, p.beta, z)
        return out.reshape(shape)

    if p.alpha == 1.0:
        out[:] = _ml_alpha_one(p.beta, z)
        return out.reshape(shape)

    small = x <= SERIES_RADIUS
    large = np.power(x, 1.0 / p.alpha) >= ASYMPTOTIC_SCALE
    mid = ~(small | large)
    if small.any():
        out[small] = _ml_series(p.alpha, p.beta, z[small])
    if large.any():
        out[large] = _ml_asymptotic(p.alpha, p.beta, x[large])
    if mid.any():
        out[mid] = _ml_integral(p.alpha, p.beta, x[mid])
    return out.reshape(shape)


def _ml_series(alpha: float, beta: float, z: np.ndarray) -> np.ndarray:
    # Terms are bounded by |z|^k / Gamma(beta + alpha k); stop at 1e-17.
    radius = float(np.max(np.abs(z), initial=0.0))
    total = np.zeros_like(z)
    power = np.ones_like(z)
    k = 0
    while True:
        total += power * special.rgamma(beta + alpha * k)
        k += 1
        bound = math.exp(k * math.log(max(radius, 1e-300)) - special.gammaln(beta + alpha * k))
        if bound < 1e-17 or k > 2000:
            break
        power = power * z
    return total


def _ml_asymptotic(alpha: float, beta: float, x: np.ndarray) -> np.ndarray:
    # E(-x) ~ -sum_k (-x)^{-k} / Gamma(beta - alpha k), truncated before the
    # smallest term k* ~ x^{1/alpha} / alpha.
    kstar = np.minimum(np.floor(np.power(x, 1.0 / alpha) / alpha), 200.0)
    logx = np.log(x)
    total = np.zeros_like(x)
    for k in range(1, 201):
        arg = beta - alpha * k
        if arg > 0.0:
            rg = float(special.rgamma(arg))
            envelope = abs(rg) * np.exp(-k * logx)
            signed = math.copysign(1.0, rg) * envelope
        else:
            # reflection: 1/Gamma(arg) = sin(pi arg) Gamma(1 - arg) / pi; the
            # envelope without the sine bounds the term even next to a pole
            envelope = np.exp(-k * logx + special.gammaln(1.0 - arg)) / math.pi
            signed = math.sin(math.pi * arg) * envelope
        term = -((-1.0) ** k) * signed
        total += np.where(k <= kstar, term, 0.0)
        if np.all((envelope < 1e-18 * np.abs(total)) | (k >= kstar)):
            break
    return total


def _ml_integral(alpha: float, beta: float, x: np.ndarray) -> np.ndarray:
    if beta >= 1.0 + alpha:
        # E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z
        lower = _ml_integral(alpha, beta - alpha, x)
        return (lower - special.rgamma(beta - alpha)) / (-x)

    power = (1.0 - beta) / alpha
    s_sin = math.sin(math.pi * (1.0 - beta))
    c_sin = math.sin(math.pi * (1.0 - beta + alpha))
    cosa = math.cos(math.pi * alpha)
    sin2 = math.sin(math.pi * alpha) ** 2
    scale = np.power(x, power) / (alpha * math.pi)
    inv_alpha = 1.0 / alpha
    # Kernel of the real-line representation after chi = x s; the peak of the
    # rational factor sits at s = -cos(alpha pi) for every x.
    s_max = 750.0 ** alpha / float(x.min())
    if power < 0.0:
        # s = w**q removes the integrable s**power singularity at the origin
        q = 1.0 / (1.0 + power)

        def kernel(w):
            s = w ** q
            rat = (s * s_sin + c_sin) / ((s + cosa) ** 2 + sin2)
            return q * np.exp(-np.power(x * s, inv_alpha)) * rat

        upper = s_max ** (1.0 + power)
        peak = max(-cosa, 1e-3) ** (1.0 + power)
    else:

        def kernel(s):
            rat = (s * s_sin + c_sin) / ((s + cosa) ** 2 + sin2)
            return np.power(s, power) * np.exp(-np.power(x * s, inv_alpha)) * rat

        upper = s_max
        peak = max(-cosa, 1e-3)

    points = [p for p in (peak, 2.0 * peak, 4.0 / float(x.max())) if 0.0 < p < upper]
    val, _ = integrate.quad_vec(
        kernel, 0.0, upper, epsabs=1e-16, epsrel=1e-13, norm="max",
        points=sorted(points), limit=20000,
    )
    return scale * val


def _ml_alpha_one(beta: float, z: np.ndarray) -> np.ndarray:
    if beta == 1.0:
        return np.exp(z)
    m = round(beta)
    small = np.abs(z) <= SERIES_RADIUS
    out = np.empty_like(z)
    out[small] = _ml_series(1.0, beta, z[small])
    if (~small).any():
        if abs(beta - m) > 0.0:
            raise ValueError("alpha = 1 with non-integer beta is only supported for |z| <= 1")
        zz = z[~small]
        head = sum(zz**k / math.factorial(k) for k in range(m - 1))
        out[~small] = zz ** (1 - m) * (np.exp(zz) - head)
    return out


def mainardi_series(alpha: float, theta: float, rtol: float = 1e-15, max_terms: int = 200) -> float:
    """eta_alpha(theta) from the stable-density series.

    Substituting theta**(-1/alpha) into the omega_alpha series gives
    eta(theta) = (1/(alpha pi)) sum_n (-1)^(n-1) theta^(n-1) Gamma(n alpha+1) sin(n alpha pi) / n!.
    Raises SeriesConvergenceError when the tail bound does not drop below
    ``rtol`` times the partial sum within ``max_terms`` terms, or when
    cancellation costs more than four digits.
    """
    _check_mainardi_args(alpha, theta)
    total = 0.0
    absolute = 0.0
    log_theta = math.log(theta)
    for n in range(1, max_terms + 1):
        log_bound = (n - 1) * log_theta + math.lgamma(n * alpha + 1.0) - math.lgamma(n + 1.0)
        if log_bound > 700.0:
            raise SeriesConvergenceError(f"series for eta_{alpha}({theta}) overflows")
        bound = math.exp(log_bound) / (alpha * math.pi)
        term = (-1.0) ** (n - 1) * bound * math.sin(n * alpha * math.pi)
        total += term
        absolute += abs(term)
        if n > 1 and bound < rtol * abs(total):
            if absolute > 1e4 * abs(total):
                raise SeriesConvergenceError(
                    f"series for eta_{alpha}({theta}) lost more than 4 digits to cancellation"
                )
            return total
    raise SeriesConvergenceError(
        f"series for eta_{alpha}({theta}) not converged after {max_terms} terms"
    )


def _kanter_density(alpha: float, theta: float) -> float:
    # Positive integral form, no cancellation:
    # eta(theta) = theta^{a/(1-a)} / ((1-a) pi) * int_0^pi A(phi) exp(-A(phi) theta^{1/(1-a)}) dphi
    a = alpha
    c = theta ** (1.0 / (1.0 - a))

    def integrand(phi: float) -> float:
        log_a = (a * math.log(math.sin(a * phi)) + (1.0 - a) * math.log(math.sin((1.0 - a) * phi))
                 - math.log(math.sin(phi))) / (1.0 - a)
        big_a = math.exp(log_a)
        expo = big_a * c
        if expo > 745.0:
            return 0.0
        return big_a * math.exp(-expo)

    a0 = (a**a * (1.0 - a) ** (1.0 - a)) ** (1.0 / (1.0 - a))
    # mass sits where A(phi) * c = O(1); A increases from a0 on [0, pi)
    val, _ = integrate.quad(integrand, 0.0, math.pi, epsabs=0.0, epsrel=1e-13, limit=400)
    if c * a0 > 745.0:
        return 0.0
    return theta ** (a / (1.0 - a)) / ((1.0 - a) * math.pi) * val


def _check_mainardi_args(alpha: float, theta: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"mainardi density needs 0 < alpha < 1, got {alpha}")
    if not theta > 0.0:
        raise ValueError(f"mainardi density needs theta > 0, got {theta}")


def mainardi_density(alpha: float, theta: float) -> float:
    """Probability density eta_alpha on (0, inf).

    Uses the series where it converges cleanly and an all-positive integral
    representation elsewhere.
    """
    _check_mainardi_args(alpha, theta)
    if alpha == 0.5:
        return math.exp(-0.25 * theta * theta) / math.sqrt(math.pi)
    try:
        return mainardi_series(alpha, theta)
    except SeriesConvergenceError:
        return _kanter_density(alpha, theta)


def stable_density(alpha: float, x: float) -> float:
    """One-sided alpha-stable density omega_alpha(x) (Laplace transform exp(-s^alpha))."""
    if not x > 0.0:
        raise ValueError(f"stable density needs x > 0, got {x}")
    return alpha * x ** (-1.0 - alpha) * mainardi_density(alpha, x ** (-alpha))


def mainardi_transform(alpha: float, lam: float, moment: int = 0) -> float:
    """Quadrature of int_0^inf theta^moment eta_alpha(theta) exp(-lam theta) dtheta.

    Independent of the Mittag-Leffler code paths; used as an oracle.
    """
    def f(th: float) -> float:
        return th**moment * mainardi_density(alpha, th) * math.exp(-lam * th)

    # eta_alpha decays like exp(-c theta^{1/(1-alpha)}); nothing survives past this
    upper = max(4.0, 60.0 ** (1.0 - alpha) * 4.0)
    breaks = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, upper]
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi > upper:
            break
        val, _ = integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=400)
        total += val
    return total
