"""Controllability operator, Gramian and the minimum-norm steering control.

Controls are piecewise constant on the solver cells, so the map

    W u = int_0^T (T-s)^{alpha-1} S_alpha(T-s) B u(s) ds

is the matrix G[n, (j, k)] = c_{j,n} * int_{cell k} k_n(T - s) ds, with the
cell integrals taken exactly from Mittag-Leffler moments.  With the inner
product <u, v> = delta * sum u v on controls, W* y = G^T y / delta and the
Gramian is W W* = G G^T / delta.  The regularised minimum-norm inverse is
u = W* (W W* + reg I)^{-1} y; on range(W) it tends to the restricted inverse
as reg -> 0, and the solver applies exactly the same G, so W u is what the
control contributes to x(T).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .quadrature import power_kernel_weights
from .spectral import SpectralField, s_alpha_factors, s_alpha_kernel_weights
from .system import ModelSpec

__all__ = [
    "SingularGramianError",
    "Gramian",
    "ControlLaw",
    "controllability_matrix",
    "build_gramian",
    "synthesize_control",
    "apply_w",
    "adjoint_w",
    "continuous_gramian",
]


class SingularGramianError(np.linalg.LinAlgError):
    """The unregularised Gramian cannot reach the requested terminal defect."""


@dataclass(frozen=True)
class Gramian:
    """Gamma_T = W W* on the retained modes (``matrix``, without the shift) and reg."""

    matrix: np.ndarray
    reg: float
    t_end: float
    operator: np.ndarray = field(repr=False)  # G, shape (N, channels, K)
    delta: float = 0.0

    @property
    def regularized(self) -> np.ndarray:
        return self.matrix + self.reg * np.eye(self.matrix.shape[0])

    def eigenvalues(self) -> np.ndarray:
        """Ascending eigenvalues of the unregularised Gramian."""
        return np.linalg.eigvalsh(self.matrix)

    def eigen_csv(self, path) -> None:
        """Diagnostics: index, eigenvalue, regularised eigenvalue."""
        ev = self.eigenvalues()
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "eigenvalue", "regularized"])
            for i, e in enumerate(ev):
                w.writerow([i, repr(float(e)), repr(float(e + self.reg))])


@dataclass(frozen=True)
class ControlLaw:
    """Piecewise-constant control: ``values[k]`` holds on [t_k, t_{k+1})."""

    grid: np.ndarray
    values: np.ndarray  # (K, channels)
    gramian: Gramian = field(repr=False)
    target_residual: float = 0.0

    @property
    def delta(self) -> float:
        return self.gramian.delta

    def energy(self) -> float:
        """||u||^2 in L^2(0, T)."""
        return float(self.delta * np.sum(self.values**2))

    def forcing(self, c: np.ndarray) -> np.ndarray:
        """B u per cell, shape (K, N)."""
        return self.values @ c

    def to_csv(self, path) -> None:
        m = self.values.shape[1]
        head = ["t", "u"] if m == 1 else ["t"] + [f"u_{j}" for j in range(1, m + 1)]
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(head)
            for t, row in zip(self.grid, self.values):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])

    @classmethod
    def zero(cls, model: ModelSpec, gramian: Gramian) -> "ControlLaw":
        k = model.n_steps
        return cls(model.times[:-1], np.zeros((k, model.b.n_channels)), gramian, 0.0)


def controllability_matrix(model: ModelSpec) -> np.ndarray:
    """G[n, j, k]: contribution of channel j held on cell k to mode n of x(T)."""
    k = model.n_steps
    w = s_alpha_kernel_weights(model.operator, model.alpha, model.delta, k)
    # cell k (from t_k to t_{k+1}) sits at lag index K-1-k
    mass = w.mass[::-1].T  # (N, K)
    return model.b.c.T[:, :, None] * mass[:, None, :]


def build_gramian(model: ModelSpec, reg: float) -> Gramian:
    if reg < 0.0:
        raise ValueError("regularisation must be non-negative")
    g = controllability_matrix(model)
    flat = g.reshape(g.shape[0], -1)
    gam = flat @ flat.T / model.delta
    gam = 0.5 * (gam + gam.T)
    return Gramian(gam, float(reg), model.t_end, g, model.delta)


def apply_w(gramian: Gramian, values: np.ndarray) -> np.ndarray:
    """W u for cell values shaped (K, channels)."""
    g = gramian.operator
    return np.einsum("njk,kj->n", g, np.asarray(values, dtype=float).reshape(g.shape[2], g.shape[1]))


def adjoint_w(gramian: Gramian, y: np.ndarray) -> np.ndarray:
    """W* y as cell values (K, channels) under <u, v> = delta * sum u v."""
    return np.einsum("njk,n->kj", gramian.operator, np.asarray(y, dtype=float)) / gramian.delta


def _solve(gramian: Gramian, y: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(gramian.matrix)
    evals = np.clip(evals, 0.0, None)
    proj = evecs.T @ y
    shifted = evals + gramian.reg
    if gramian.reg == 0.0:
        tiny = shifted <= 1e-12 * max(shifted.max(), 1e-300)
        if np.any(tiny & (np.abs(proj) > 1e-8 * max(np.linalg.norm(y), 1e-300))):
            raise SingularGramianError("terminal defect lies outside the numerical range of W")
        shifted = np.where(tiny, np.inf, shifted)
    return evecs @ (proj / shifted)


def synthesize_control(model: ModelSpec, free_terminal, gramian: Gramian) -> ControlLaw:
    """u = W* (Gamma_T + reg I)^{-1} y for the terminal defect y."""
    y = free_terminal.coeffs if isinstance(free_terminal, SpectralField) else np.asarray(free_terminal, float)
    if y.size != model.n_modes:
        raise ValueError("terminal defect does not match the number of modes")
    if not np.any(y):
        return ControlLaw.zero(model, gramian)
    values = adjoint_w(gramian, _solve(gramian, y))
    residual = float(np.linalg.norm(apply_w(gramian, values) - y))
    return ControlLaw(model.times[:-1], values, gramian, residual)


def continuous_gramian(model: ModelSpec, n_nodes: int | None = None) -> np.ndarray:
    """int_0^T tau^{2 alpha - 2} S_alpha(tau) B B* S_alpha(tau)* dtau by product quadrature.

    The weak singularity tau^{2 alpha - 2} is integrated exactly against the
    piecewise-linear interpolant of the Mittag-Leffler products.  Oracle for
    the cell-based Gramian, which converges to it as the grid is refined.
    """
    n_nodes = n_nodes or model.n_steps
    h = model.t_end / n_nodes
    tau = h * np.arange(n_nodes + 1)
    order = 2.0 * model.alpha - 1.0
    stencil = power_kernel_weights(order, h, n_nodes).stencil() * math.gamma(order)
    e = s_alpha_factors(model.operator, model.alpha, tau)  # (nodes, N)
    bb = model.b.c.T @ model.b.c
    return np.einsum("k,kn,km->nm", stencil, e, e) * bb
