"""Product-trapezoidal quadrature for convolutions with weakly singular kernels.

Every convolution in the package, I(t_j) = int k(t_j - s) f(s) ds, is
discretised the same way: f is replaced by its piecewise-linear interpolant
on a uniform grid and the kernel is integrated exactly against each hat
function.  Only the kernel moments

    K0(x) = int_0^x k(tau) dtau,   K1(x) = int_0^x tau k(tau) dtau

are needed, so singular kernels such as tau**(alpha-1) cost nothing extra.
Weights depend on the lag only, which makes the sums Toeplitz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import signal, special


@dataclass(frozen=True)
class CellWeights:
    """Exact hat-function weights per lag cell.

    ``near[d]`` multiplies the node at lag ``d`` and ``far[d]`` the node at lag
    ``d + 1`` for the cell [d*delta, (d+1)*delta] in lag variable.  Arrays are
    shaped (n_cells,) or (n_cells, n_modes).
    """

    near: np.ndarray
    far: np.ndarray
    mass: np.ndarray  # int of k over each cell

    @property
    def n_cells(self) -> int:
        return self.near.shape[0]

    def stencil(self) -> np.ndarray:
        """Node weights for a full window of ``n_cells`` cells (lags 0..n)."""
        n = self.n_cells
        shape = (n + 1,) + self.near.shape[1:]
        w = np.zeros(shape)
        w[:n] += self.near
        w[1:] += self.far
        return w


def cell_weights(k0: Callable, k1: Callable, delta: float, n_cells: int) -> CellWeights:
    """Weights from kernel moments evaluated at lags 0, delta, ..., n*delta."""
    lags = delta * np.arange(n_cells + 1)
    m0_nodes = np.asarray(k0(lags), dtype=float)
    m1_nodes = np.asarray(k1(lags), dtype=float)
    # moments come back with the lag axis last; move it first
    m0 = np.moveaxis(np.diff(m0_nodes, axis=-1), -1, 0)
    m1 = np.moveaxis(np.diff(m1_nodes, axis=-1), -1, 0)
    a = lags[:-1].reshape((-1,) + (1,) * (m0.ndim - 1))
    # on lag cell [a, a+delta] the interpolant is f_near*(a+delta-tau)/delta + f_far*(tau-a)/delta
    near = ((a + delta) * m0 - m1) / delta
    far = (m1 - a * m0) / delta
    return CellWeights(near=near, far=far, mass=m0)


def power_kernel_weights(order: float, delta: float, n_cells: int) -> CellWeights:
    """Weights for k(tau) = tau**(order-1) / Gamma(order), order > 0."""
    g1 = math.gamma(order + 1.0)
    g2 = math.gamma(order + 2.0)
    return cell_weights(
        lambda x: x**order / g1,
        lambda x: order * x ** (order + 1.0) / g2,
        delta,
        n_cells,
    )


def exp_kernel_weights(rate: float, delta: float, n_cells: int) -> CellWeights:
    """Weights for k(tau) = exp(-rate * tau); rate may be negative or zero."""

    def k0(x):
        return x * special.exprel(-rate * x)

    def k1(x):
        return x * x * _second_exprel(-rate * x)

    return cell_weights(k0, k1, delta, n_cells)


def _second_exprel(z):
    # (e^z (z - 1) + 1) / z^2 = int_0^1 s e^{z s} ds, stable at z = 0
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 0.1
    zs = z[small]
    # sum_k z^k / (k! (k + 2))
    term = np.ones_like(zs)
    acc = term / 2.0
    for k in range(1, 12):
        term = term * zs / k
        acc = acc + term / (k + 2)
    out[small] = acc
    zl = z[~small]
    out[~small] = (np.exp(zl) * (zl - 1.0) + 1.0) / zl**2
    return out


def causal_convolve(w: CellWeights, f: np.ndarray) -> np.ndarray:
    """I_j = int_0^{t_j} k(t_j - s) f(s) ds for j = 0..K with f sampled at K+1 nodes.

    ``f`` has time on axis 0; extra axes must broadcast against the mode axis
    of the weights.  Needs ``w.n_cells >= K + 1`` (the end correction at t_K
    uses the cell beyond it).
    """
    f = np.asarray(f, dtype=float)
    n_nodes = f.shape[0]
    if w.n_cells < n_nodes:
        raise ValueError("not enough lag cells for this grid")
    near = _expand(w.near[:n_nodes], f.ndim)
    far = _expand(w.far[:n_nodes], f.ndim)
    full = np.zeros_like(near)
    full[:] = near
    full[1:] += far[:-1]
    out = _toeplitz_apply(full, f)
    # the full-stencil sum also counts the near weight of the cell beyond t_0
    correction = near * f[0]
    out = out - correction
    # recompute j=0 exactly: the integral over an empty interval vanishes
    out[0] = 0.0
    return out


def window_convolve(w: CellWeights, f: np.ndarray) -> np.ndarray:
    """Sliding-window sums over the last ``w.n_cells`` cells.

    Returns I_j = sum_m stencil[m] f[j - m] for j = n..len(f)-1, i.e. only
    the positions whose window is fully inside the data.
    """
    f = np.asarray(f, dtype=float)
    stencil = _expand(w.stencil(), f.ndim)
    n = w.n_cells
    if f.shape[0] < n + 1:
        raise ValueError("data shorter than the window")
    full = _toeplitz_apply(stencil, f)
    return full[n:]


def _expand(weights: np.ndarray, ndim: int) -> np.ndarray:
    # lag-only weights against data with trailing axes
    if weights.ndim < ndim:
        return weights.reshape(weights.shape + (1,) * (ndim - weights.ndim))
    return weights


def _toeplitz_apply(weights: np.ndarray, f: np.ndarray) -> np.ndarray:
    # out[j] = sum_m weights[m] f[j-m], j = 0..len(f)-1; trailing axes broadcast
    n = f.shape[0]
    tail = np.broadcast_shapes(weights.shape[1:], f.shape[1:])
    wb = np.broadcast_to(weights, weights.shape[:1] + tail)
    fb = np.broadcast_to(f, f.shape[:1] + tail)
    if n * wb.shape[0] <= 4096:
        out = np.zeros(fb.shape)
        for m in range(min(wb.shape[0], n)):
            out[m:] += wb[m] * fb[: n - m]
        return out
    return signal.fftconvolve(fb, wb, axes=0)[:n]
