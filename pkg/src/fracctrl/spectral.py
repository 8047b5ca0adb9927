"""The Dirichlet Laplacian on [0, pi] in its sine eigenbasis.

Everything is diagonal in e_n(xi) = sqrt(2/pi) sin(n xi) with -A e_n = n^2 e_n,
so the semigroup, fractional powers and the fractional solution operators
are coefficient-wise multipliers:

    S(t)        e^{-n^2 t}
    (-A)^b      n^{2b}
    T_alpha(t)  E_{alpha,1}(-n^2 t^alpha)
    S_alpha(t)  E_{alpha,alpha}(-n^2 t^alpha)

The subordination integrals against the Mainardi density define the same
operators; they are used only as a test oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .quadrature import CellWeights, cell_weights
from .specfun import mittag_leffler_array

__all__ = [
    "SpectralField",
    "OperatorSpec",
    "eigenfunctions",
    "apply_semigroup",
    "apply_neg_a_pow",
    "apply_t_alpha",
    "apply_s_alpha",
    "t_alpha_factors",
    "s_alpha_factors",
    "s_alpha_kernel_weights",
    "BoundFit",
    "bound_time_grid",
    "semigroup_power_bound",
    "s_alpha_power_bound",
    "TailReport",
    "tail_energy",
]


@dataclass(frozen=True)
class SpectralField:
    """Coefficients of a field in the orthonormal basis e_1..e_N."""

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size < 1:
            raise ValueError("coeffs must be a non-empty vector")
        object.__setattr__(self, "coeffs", c)

    @property
    def n_modes(self) -> int:
        return self.coeffs.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    @classmethod
    def basis(cls, n_modes: int, n: int) -> "SpectralField":
        """The unit vector e_n (1-based)."""
        c = np.zeros(n_modes)
        c[n - 1] = 1.0
        return cls(c)


@dataclass(frozen=True)
class OperatorSpec:
    """Truncation of A to its first ``n_modes`` eigenpairs."""

    n_modes: int

    def __post_init__(self) -> None:
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ValueError(f"n_modes must be a positive integer, got {self.n_modes}")

    @property
    def modes(self) -> np.ndarray:
        return np.arange(1, self.n_modes + 1, dtype=float)

    @property
    def eigenvalues(self) -> np.ndarray:
        """lambda_n = n^2, the eigenvalues of -A."""
        return self.modes**2


def eigenfunctions(n_modes: int, xi: np.ndarray) -> np.ndarray:
    """Matrix E[n-1, j] = e_n(xi_j)."""
    n = np.arange(1, n_modes + 1)[:, None]
    return math.sqrt(2.0 / math.pi) * np.sin(n * np.asarray(xi, dtype=float)[None, :])


def _check_field(spec: OperatorSpec, x: SpectralField) -> None:
    if x.n_modes != spec.n_modes:
        raise ValueError(f"field has {x.n_modes} modes, operator has {spec.n_modes}")


def apply_semigroup(spec: OperatorSpec, t: float, x: SpectralField) -> SpectralField:
    if t < 0.0:
        raise ValueError("semigroup time must be non-negative")
    _check_field(spec, x)
    return SpectralField(np.exp(-spec.eigenvalues * t) * x.coeffs)


def apply_neg_a_pow(spec: OperatorSpec, beta: float, x: SpectralField) -> SpectralField:
    """(-A)^beta for beta in [-1, 1]; negative beta gives the bounded inverse powers."""
    if abs(beta) > 1.0:
        raise ValueError(f"power must lie in [-1, 1], got {beta}")
    _check_field(spec, x)
    return SpectralField(spec.eigenvalues**beta * x.coeffs)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")


def t_alpha_factors(spec: OperatorSpec, alpha: float, t) -> np.ndarray:
    """E_{alpha,1}(-n^2 t^alpha); shape (len(t), N) for array t, (N,) for scalar t."""
    return _ml_factors(spec, alpha, 1.0, t)


def s_alpha_factors(spec: OperatorSpec, alpha: float, t) -> np.ndarray:
    """E_{alpha,alpha}(-n^2 t^alpha); at t = 0 every factor is 1/Gamma(alpha)."""
    return _ml_factors(spec, alpha, alpha, t)


def _ml_factors(spec: OperatorSpec, alpha: float, beta: float, t) -> np.ndarray:
    _check_alpha(alpha)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("time must be non-negative")
    z = -np.multiply.outer(t**alpha, spec.eigenvalues)
    return mittag_leffler_array(alpha, beta, z)


def apply_t_alpha(spec: OperatorSpec, alpha: float, t: float, x: SpectralField) -> SpectralField:
    _check_field(spec, x)
    return SpectralField(t_alpha_factors(spec, alpha, t) * x.coeffs)


def apply_s_alpha(spec: OperatorSpec, alpha: float, t: float, x: SpectralField) -> SpectralField:
    _check_field(spec, x)
    return SpectralField(s_alpha_factors(spec, alpha, t) * x.coeffs)


def s_alpha_kernel_weights(spec: OperatorSpec, alpha: float, delta: float, n_cells: int) -> CellWeights:
    """Product-trapezoidal weights for k_n(tau) = tau^{alpha-1} E_{alpha,alpha}(-n^2 tau^alpha).

    Exact moments: int_0^x k_n = x^alpha E_{alpha,alpha+1}(-n^2 x^alpha) and
    int_0^x tau k_n = x^{alpha+1} (E_{alpha,alpha+1} - E_{alpha,alpha+2})(-n^2 x^alpha).
    Arrays are (n_cells, N) and cached per (alpha, N, delta, n_cells).
    """
    _check_alpha(alpha)
    return _s_alpha_weights_cached(float(alpha), int(spec.n_modes), float(delta), int(n_cells))


@lru_cache(maxsize=16)
def _s_alpha_weights_cached(alpha: float, n_modes: int, delta: float, n_cells: int) -> CellWeights:
    lam = np.arange(1, n_modes + 1, dtype=float) ** 2

    def moments(x):
        z = -np.multiply.outer(lam, x**alpha)  # (N, lags)
        e1 = mittag_leffler_array(alpha, alpha + 1.0, z)
        e2 = mittag_leffler_array(alpha, alpha + 2.0, z)
        return x**alpha * e1, x ** (alpha + 1.0) * (e1 - e2)

    cache = {}

    def k0(x):
        cache["m"] = moments(x)
        return cache["m"][0]

    def k1(x):
        return cache["m"][1]

    w = cell_weights(k0, k1, delta, n_cells)
    for arr in (w.near, w.far, w.mass):
        arr.setflags(write=False)
    return w


@dataclass(frozen=True)
class BoundFit:
    """Smallest constant making a bound hold on the sampled (t, mode) grid."""

    constant: float
    analytic: float | None
    decay_rate: float
    t_grid: np.ndarray = field(repr=False)

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.constant))


def bound_time_grid(spec: OperatorSpec, delta: float, n_points: int = 200) -> np.ndarray:
    """Log-spaced times plus the per-mode maximisers t = delta / n^2."""
    base = np.logspace(-6, 1, n_points)
    peaks = delta / spec.eigenvalues if delta > 0.0 else np.empty(0)
    return np.unique(np.concatenate([base, peaks]))


def semigroup_power_bound(spec: OperatorSpec, delta: float, t_grid=None) -> BoundFit:
    """Fit M_delta in ||(-A)^delta S(t)|| <= M_delta t^{-delta} e^{-lam t} with lam = 0.

    The exact supremum over all modes is sup_x x^delta e^{-x} = (delta/e)^delta;
    the fit is exact whenever the grid contains delta/n^2 for some retained n.
    ``decay_rate`` is the exponential rate of the operator norm at the largest
    sampled times (it tends to lambda_1 = 1).
    """
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    t = bound_time_grid(spec, delta) if t_grid is None else np.asarray(t_grid, dtype=float)
    lam = spec.eigenvalues
    norms = np.max(lam[None, :] ** delta * np.exp(-np.multiply.outer(t, lam)), axis=1)
    constant = float(np.max(norms * t**delta))
    return BoundFit(constant, (delta / math.e) ** delta, _decay_rate(t, norms), t)


def s_alpha_power_bound(spec: OperatorSpec, alpha: float, delta: float, t_grid=None) -> BoundFit:
    """Fit M_delta in ||(-A)^delta S_alpha(t)|| <= alpha M_delta t^{-alpha delta} G.

    G = Gamma(2 - delta) / Gamma(1 + alpha (1 - delta)); the operator norm is
    max_n n^{2 delta} |E_{alpha,alpha}(-n^2 t^alpha)|.
    """
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    t = bound_time_grid(spec, delta) if t_grid is None else np.asarray(t_grid, dtype=float)
    t = t[t > 0.0]
    lam = spec.eigenvalues
    fac = np.abs(s_alpha_factors(spec, alpha, t))
    norms = np.max(lam[None, :] ** delta * fac, axis=1)
    g = math.gamma(2.0 - delta) / math.gamma(1.0 + alpha * (1.0 - delta))
    constant = float(np.max(norms * t ** (alpha * delta)) / (alpha * g))
    return BoundFit(constant, None, _decay_rate(t, norms), t)


def _decay_rate(t: np.ndarray, norms: np.ndarray) -> float:
    # slope of -log(norm) over the last decade of sampled times
    sel = t >= t.max() / 10.0
    if sel.sum() < 2 or np.any(norms[sel] <= 0.0):
        return float("nan")
    return float(-np.polyfit(t[sel], np.log(norms[sel]), 1)[0])


@dataclass(frozen=True)
class TailReport:
    """Energy in the highest modes, a truncation diagnostic."""

    n_tail: int
    energy: float
    relative: float


def tail_energy(x, fraction: float = 0.1) -> TailReport:
    """Squared norm carried by the top ``fraction`` of modes (at least one mode)."""
    c = x.coeffs if isinstance(x, SpectralField) else np.asarray(x, dtype=float)
    n_tail = max(1, int(math.ceil(fraction * c.shape[-1])))
    tail = float(np.sum(c[..., -n_tail:] ** 2))
    total = float(np.sum(c**2))
    return TailReport(n_tail, tail, tail / total if total > 0.0 else 0.0)
