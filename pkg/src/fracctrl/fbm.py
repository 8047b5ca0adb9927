"""Fractional Brownian motion: exact sampling on a uniform grid and Wiener sums.

Increments of fBm (fractional Gaussian noise) are stationary, so the default
sampler is circulant embedding of their autocovariance (Davies-Harte).  For
H > 1/2 the embedding is always non-negative definite; a Cholesky sampler of
the same covariance is kept as fallback and as an independent oracle.

Seeds are derived with numpy's SeedSequence: mode n of a Q-fBm uses
SeedSequence(seed, spawn_key=(n,)), so adding modes never changes the
paths of the existing ones.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, linalg

from .spectral import SpectralField

__all__ = [
    "FbmGrid",
    "QCovariance",
    "FbmPath",
    "fbm_cov",
    "increment_autocov",
    "path_seed",
    "sample_fbm",
    "sample_qfbm",
    "wiener_integral",
    "hs_norm_sq",
    "variance_bound",
    "reference_integrands",
    "sample_integrand",
]


@dataclass(frozen=True)
class FbmGrid:
    t_end: float
    n_steps: int
    hurst: float

    def __post_init__(self) -> None:
        if not self.t_end > 0.0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        if not 0.5 < self.hurst < 1.0:
            raise ValueError(f"hurst must lie in (1/2, 1), got {self.hurst}")

    @property
    def delta(self) -> float:
        return self.t_end / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.delta * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class QCovariance:
    """Eigenvalues lambda_n^Q of the noise covariance on the retained modes.

    ``tail_bound`` optionally bounds sum_{n > N} sqrt(lambda_n^Q) for the
    discarded modes; the infinite trace itself cannot be checked on a
    finite list.
    """

    eigs: np.ndarray
    tail_bound: float | None = None

    def __post_init__(self) -> None:
        e = np.asarray(self.eigs, dtype=float).ravel()
        if e.size < 1 or not np.all(np.isfinite(e)) or np.any(e < 0.0):
            raise ValueError("Q eigenvalues must be a non-empty list of finite non-negative reals")
        object.__setattr__(self, "eigs", e)

    @classmethod
    def power_law(cls, n_modes: int, power: float = 4.0, scale: float = 1.0) -> "QCovariance":
        n = np.arange(1, n_modes + 1, dtype=float)
        eigs = scale * n ** (-power)
        # sum_{n>N} n^{-p/2} <= N^{1-p/2}/(p/2-1) when p > 2
        tail = scale**0.5 * n_modes ** (1.0 - power / 2.0) / (power / 2.0 - 1.0) if power > 2.0 else None
        return cls(eigs, tail)

    @property
    def n_modes(self) -> int:
        return self.eigs.size

    def trace(self) -> float:
        """sum sqrt(lambda_n) over retained modes."""
        return float(np.sqrt(self.eigs).sum())

    def trace_converged(self, share: float = 0.05) -> bool:
        """Ratio test on the truncated trace.

        With a tail bound: the bound must be below ``share`` of the retained
        trace.  Without one: the last quarter of the retained terms must carry
        less than ``share`` of the partial sum.
        """
        total = self.trace()
        if total == 0.0:
            return True
        if self.tail_bound is not None:
            return self.tail_bound <= share * total
        roots = np.sqrt(self.eigs)
        k = max(1, self.n_modes // 4)
        return float(roots[-k:].sum()) <= share * total


@dataclass(frozen=True)
class FbmPath:
    """Increments [mode, step] of a sampled Q-fBm; immutable."""

    grid: FbmGrid
    increments: np.ndarray
    seed: int
    q: QCovariance | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        inc = np.array(self.increments, dtype=float)
        if inc.ndim == 1:
            inc = inc[None, :]
        if inc.shape[1] != self.grid.n_steps:
            raise ValueError("increments do not match the grid")
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @property
    def n_modes(self) -> int:
        return self.increments.shape[0]

    def values(self) -> np.ndarray:
        """Cumulative values B_n(t_k), shape (n_modes, n_steps + 1)."""
        out = np.zeros((self.n_modes, self.grid.n_steps + 1))
        np.cumsum(self.increments, axis=1, out=out[:, 1:])
        return out

    def to_csv(self, path) -> None:
        """Header t,mode_1..mode_N; one row per grid point, cumulative values."""
        vals = self.values()
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"mode_{n}" for n in range(1, self.n_modes + 1)])
            for k, t in enumerate(self.grid.times):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in vals[:, k]])


def fbm_cov(s: float, t: float, hurst: float) -> float:
    """R_H(s, t) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2."""
    if s < 0.0 or t < 0.0:
        raise ValueError("fbm_cov needs non-negative times")
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"hurst must lie in (0, 1), got {hurst}")
    h2 = 2.0 * hurst
    return 0.5 * (t**h2 + s**h2 - abs(t - s) ** h2)


def increment_autocov(lags, hurst: float, delta: float = 1.0) -> np.ndarray:
    """Autocovariance of fGn increments at integer lags, step ``delta``."""
    k = np.abs(np.asarray(lags, dtype=float))
    h2 = 2.0 * hurst
    return 0.5 * delta**h2 * (np.abs(k + 1.0) ** h2 - 2.0 * k**h2 + np.abs(k - 1.0) ** h2)


def path_seed(base_seed: int, index: int) -> int:
    """Deterministic 64-bit seed for replica ``index`` of a run seeded with ``base_seed``."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


# below this size Cholesky is as cheap as the FFT route
_CHOLESKY_MAX = 8


def sample_fbm(grid: FbmGrid, seed, method: str = "auto") -> np.ndarray:
    """n_steps increments of a standard fBm on ``grid``.

    ``seed`` is an int or a SeedSequence.  ``method`` is "circulant",
    "cholesky" or "auto" (circulant unless the grid is tiny or the
    embedding turns out indefinite).
    """
    rng = np.random.default_rng(seed)
    if method not in ("auto", "circulant", "cholesky"):
        raise ValueError(f"unknown method {method!r}")
    if method == "cholesky" or (method == "auto" and grid.n_steps <= _CHOLESKY_MAX):
        return _sample_cholesky(grid, rng)
    eig = _circulant_eigs(grid)
    if eig is None:
        if method == "circulant":
            raise ArithmeticError("circulant embedding is not non-negative definite")
        return _sample_cholesky(grid, rng)
    return _sample_circulant(grid, eig, rng)


def _circulant_eigs(grid: FbmGrid):
    n = grid.n_steps
    gam = increment_autocov(np.arange(n + 1), grid.hurst, grid.delta)
    row = np.concatenate([gam, gam[-2:0:-1]])
    eig = np.fft.fft(row).real
    if eig.min() < -1e-12 * eig.max():
        return None
    return np.clip(eig, 0.0, None)


def _sample_circulant(grid: FbmGrid, eig: np.ndarray, rng) -> np.ndarray:
    m = eig.size
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    w = np.fft.fft(np.sqrt(eig / m) * z)
    return w.real[: grid.n_steps]


def increment_covariance(grid: FbmGrid) -> np.ndarray:
    """Full Toeplitz covariance matrix of the increments."""
    n = grid.n_steps
    return linalg.toeplitz(increment_autocov(np.arange(n), grid.hurst, grid.delta))


def _sample_cholesky(grid: FbmGrid, rng) -> np.ndarray:
    chol = linalg.cholesky(increment_covariance(grid), lower=True)
    return chol @ rng.standard_normal(grid.n_steps)


def sample_qfbm(grid: FbmGrid, q: QCovariance, seed: int, method: str = "auto") -> FbmPath:
    """Mode n gets sqrt(lambda_n^Q) times an independent standard fBm."""
    inc = np.zeros((q.n_modes, grid.n_steps))
    for n, lam in enumerate(q.eigs, start=1):
        if lam == 0.0:
            continue
        sub = np.random.SeedSequence(entropy=int(seed), spawn_key=(n,))
        inc[n - 1] = math.sqrt(lam) * sample_fbm(grid, sub, method)
    return FbmPath(grid, inc, int(seed), q)


def wiener_integral(integrand, path: FbmPath) -> SpectralField:
    """Left-point sum sum_k phi(t_k) dB(t_k) over the whole grid.

    ``integrand`` is sampled at the left points t_0..t_{K-1}: shape (K, N) for
    an operator diagonal in the modes, (K, N, N) for a full operator.
    """
    phi = np.asarray(integrand, dtype=float)
    k, n = path.grid.n_steps, path.n_modes
    if phi.shape[0] != k or phi.shape[1] != n:
        raise ValueError(f"integrand shape {phi.shape} does not match grid ({k} steps, {n} modes)")
    dB = path.increments.T  # (K, N)
    if phi.ndim == 2:
        return SpectralField(np.sum(phi * dB, axis=0))
    if phi.ndim == 3 and phi.shape[2] == n:
        return SpectralField(np.einsum("kij,kj->i", phi, dB))
    raise ValueError("integrand must have shape (K, N) or (K, N, N)")


def hs_norm_sq(values: np.ndarray, q: QCovariance) -> np.ndarray:
    """||psi||^2 in L_2^0 for mode-diagonal psi: sum_n lambda_n psi_n^2 (last axis = modes)."""
    return np.sum(q.eigs * np.asarray(values, dtype=float) ** 2, axis=-1)


def variance_bound(func, t: float, hurst: float, q: QCovariance) -> float:
    """2H t^{2H-1} int_0^t ||psi(s)||^2_{L_2^0} ds for a diagonal integrand psi(s) -> (N,)."""
    val, _ = integrate.quad(lambda s: float(hs_norm_sq(func(s), q)), 0.0, t, epsabs=1e-14, epsrel=1e-12)
    return 2.0 * hurst * t ** (2.0 * hurst - 1.0) * val


def reference_integrands(n_modes: int) -> dict:
    """Deterministic diagonal integrands used to exercise the second-moment bound."""
    n = np.arange(1, n_modes + 1, dtype=float)
    return {
        "linear": lambda s: np.full(n_modes, float(s)),
        "constant": lambda s: np.ones(n_modes),
        "decaying": lambda s: np.exp(-s * n) / n,
    }


def sample_integrand(func, grid: FbmGrid) -> np.ndarray:
    """func at the left points t_0..t_{K-1}, shape (K, N)."""
    return np.array([func(t) for t in grid.times[:-1]])
