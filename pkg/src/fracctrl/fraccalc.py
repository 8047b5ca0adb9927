"""Riemann-Liouville integral and Riemann-Liouville / Caputo derivatives on a grid.

The solver never discretises the strong form (it works with the mild,
variation-of-constants equation).  These operators exist to validate that
formulation and to let users state problems in strong form; they share the
product-trapezoidal weights used by every solver convolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .quadrature import _expand, _toeplitz_apply, causal_convolve, power_kernel_weights

__all__ = ["SampledFn", "rl_integral", "rl_derivative", "caputo_derivative"]


@dataclass(frozen=True)
class SampledFn:
    """Values on a uniform grid; time runs along axis 0 of ``values``.

    ``exponents`` lists non-integer powers (t - t_0)**e known to be present
    near the left end (for instance because the values came out of
    ``rl_integral``).  They switch on starting-weight corrections that keep
    the quadrature accurate right up to t_0.
    """

    grid: np.ndarray
    values: np.ndarray
    exponents: tuple = ()

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("grid must be 1-d with at least two points")
        steps = np.diff(grid)
        if np.any(steps <= 0.0):
            raise ValueError("grid must be strictly increasing")
        if np.ptp(steps) > 1e-9 * steps.mean():
            raise ValueError("grid must be uniform")
        if values.shape[0] != grid.size:
            raise ValueError("values must have one entry per grid point along axis 0")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @classmethod
    def from_function(cls, func: Callable, t_end: float, n_steps: int) -> "SampledFn":
        grid = np.linspace(0.0, t_end, n_steps + 1)
        return cls(grid, func(grid))

    def __sub__(self, other: "SampledFn") -> "SampledFn":
        return SampledFn(self.grid, self.values - other.values,
                         _merge(self.exponents, other.exponents))


def rl_integral(f: SampledFn, alpha: float) -> SampledFn:
    """J^alpha f(t) = (1/Gamma(alpha)) int_{t_0}^t (t-s)^{alpha-1} f(s) ds."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    n = f.grid.size
    weights = power_kernel_weights(alpha, f.step, n)
    out = causal_convolve(weights, f.values)
    if f.exponents:
        out = out + _starting_correction(lambda v: causal_convolve(weights, v), f, alpha)
    produced = [e + alpha for e in f.exponents] + [alpha, alpha + 1.0]
    return SampledFn(f.grid, out, _merge(produced))


# exponents at or beyond this are smooth enough for the plain rule
_EXPONENT_CAP = 2.0


def _merge(*groups) -> tuple:
    keep = set()
    for group in groups:
        for e in group:
            if e < _EXPONENT_CAP and abs(e - round(e)) > 1e-9:
                keep.add(round(float(e), 12))
    return tuple(sorted(keep))


def _starting_correction(scheme, f: SampledFn, order: float) -> np.ndarray:
    # weights on the first s nodes chosen so that (t-t0)^e is mapped exactly
    # to Gamma(e+1)/Gamma(e+1+order) (t-t0)^(e+order) for every listed
    # exponent e (Lubich-type starting weights); order < 0 is a derivative
    sig = np.asarray(f.exponents)
    s = sig.size
    h = f.step
    tau = f.grid - f.grid[0]
    if tau.size <= s:
        return np.zeros_like(f.values)
    samples = tau[None, :] ** sig[:, None]
    approx = scheme(samples.T).T
    gam = np.array([math.gamma(e + 1.0) / math.gamma(e + 1.0 + order) for e in sig])
    exact = np.zeros_like(approx)
    exact[:, 1:] = gam[:, None] * tau[None, 1:] ** (sig[:, None] + order)
    resid = exact - approx
    resid[:, 0] = 0.0
    nodes = np.arange(1, s + 1) * h
    vander = nodes[None, :] ** sig[:, None]
    start = np.linalg.solve(vander, resid)  # (s, n_nodes)
    return np.tensordot(start.T, f.values[1 : s + 1], axes=(1, 0))


def _l1_scheme(values: np.ndarray, alpha: float, h: float) -> np.ndarray:
    # exact D^alpha of the piecewise-linear interpolant at the nodes:
    # f_0 t^-alpha / Gamma(1-alpha) + sum_j b_{n-1-j} (f_{j+1} - f_j)
    n = values.shape[0]
    k = np.arange(n - 1, dtype=float)
    b = ((k + 1.0) ** (1.0 - alpha) - k ** (1.0 - alpha)) * h**-alpha / math.gamma(2.0 - alpha)
    out = np.zeros(values.shape)
    out[1:] = _toeplitz_apply(_expand(b, values.ndim), np.diff(values, axis=0))
    tau = np.arange(n, dtype=float) * h
    with np.errstate(divide="ignore", invalid="ignore"):
        head = np.where(values[0] == 0.0, 0.0, values[0] * _expand(tau, values.ndim) ** -alpha)
    return out + head / math.gamma(1.0 - alpha)


def rl_derivative(f: SampledFn, alpha: float) -> SampledFn:
    """D^alpha f = d/dt J^{1-alpha} f, exact for the piecewise-linear interpolant.

    Constants and linear functions are reproduced at every node; listed
    exponents get starting weights.  The value at t_0 is infinite when
    f(t_0) != 0.
    """
    _check_derivative_order(alpha)
    h = f.step
    out = _l1_scheme(f.values, alpha, h)
    if f.exponents:
        out = out + _starting_correction(lambda v: _l1_scheme(v, alpha, h), f, -alpha)
    # derivatives carry negative powers near t_0, so no exponents are passed on
    return SampledFn(f.grid, out)


def caputo_derivative(f: SampledFn, alpha: float) -> SampledFn:
    """Caputo derivative D^alpha (f - f(t_0))."""
    _check_derivative_order(alpha)
    shifted = SampledFn(f.grid, f.values - f.values[0], f.exponents)
    return rl_derivative(shifted, alpha)


def _check_derivative_order(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"derivative order must lie in (0, 1), got {alpha}")
