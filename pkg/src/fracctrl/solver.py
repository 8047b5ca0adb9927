"""Picard iteration for the mild equation and the controlled-steering pipeline.

On the grid t_j = j*delta the fixed-point map is

    Pi(x)(t) = T_alpha(t)(phi(0) - g(0, phi)) + g(t, x_t)
             + int (t-s)^{alpha-1} A S_alpha(t-s) g(s, x_s) ds
             + int (t-s)^{alpha-1} S_alpha(t-s) f(s, x_s) ds
             + int (t-s)^{alpha-1} S_alpha(t-s) B u(s) ds
             + int (t-s)^{alpha-1} S_alpha(t-s) sigma dB^H(s).

All singular convolutions use the exact-moment product weights of
``spectral.s_alpha_kernel_weights``.  Control and noise are piecewise
constant per cell and enter through the exact cell masses of the kernel,
so the control term at T is exactly W u from the control module.  The
delay integrals in g and f are split into a history part (fixed) and a
trajectory part (recomputed every sweep).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .control import ControlLaw, Gramian, apply_w, build_gramian, synthesize_control
from .fbm import FbmGrid, FbmPath, QCovariance, path_seed, sample_qfbm
from .quadrature import _toeplitz_apply, causal_convolve
from .spectral import s_alpha_kernel_weights, t_alpha_factors, tail_energy
from .system import (
    HistorySegment,
    ModelSpec,
    delay_stencil,
    f_pointwise,
    f_project,
    g_lift,
)

__all__ = [
    "NonConvergence",
    "Trajectory",
    "SolveReport",
    "MonteCarloStats",
    "sample_noise",
    "picard_solve",
    "simulate_controlled",
    "monte_carlo",
]


class NonConvergence(RuntimeError):
    """Picard iteration hit its cap; carries the last iterate and contraction ratio."""

    def __init__(self, message: str, trajectory=None, last_ratio: float = float("nan")):
        super().__init__(message)
        self.trajectory = trajectory
        self.last_ratio = last_ratio


@dataclass(frozen=True)
class Trajectory:
    grid: np.ndarray
    states: np.ndarray  # (K+1, N)
    history: HistorySegment
    iterations: int
    converged: bool
    picard_ratios: tuple = ()
    neutral_ratios: tuple = ()
    residual: float = float("nan")

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]

    def combined(self) -> np.ndarray:
        """History (without its last point) followed by the states."""
        return np.vstack([self.history.values[:-1], self.states])

    def window(self, t: float) -> HistorySegment:
        """x_t as a segment on [-tau_hist, 0]; t must be a grid point."""
        step = self.history.step
        j = int(round(t / step))
        if j < 0 or j >= self.grid.size or abs(j * step - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t = {t} is not a grid point of the trajectory")
        n = self.history.n_cells
        return HistorySegment(self.history.grid, self.combined()[j : j + n + 1])

    def to_csv(self, path) -> None:
        import csv
        from pathlib import Path

        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"mode_{n}" for n in range(1, self.states.shape[1] + 1)])
            for t, row in zip(self.grid, self.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


@dataclass(frozen=True)
class SolveReport:
    terminal_error: float
    control_energy: float
    picard_ratios: tuple
    tail_energy: float
    neutral_ratios: tuple = ()
    iterations: int = 0
    outer_iterations: int = 0
    status: str = "converged"
    seed: int = 0
    path_index: int = 0
    reg: float = 0.0
    target_norm: float = 0.0
    outer_errors: tuple = ()
    trajectory: Trajectory | None = field(default=None, repr=False, compare=False)
    law: ControlLaw | None = field(default=None, repr=False, compare=False)

    @property
    def relative_error(self) -> float:
        return self.terminal_error / self.target_norm if self.target_norm > 0.0 else self.terminal_error

    def summary(self) -> dict:
        return {
            "terminal_error": self.terminal_error,
            "relative_error": self.relative_error,
            "control_energy": self.control_energy,
            "tail_energy": self.tail_energy,
            "iterations": self.iterations,
            "outer_iterations": self.outer_iterations,
            "status": self.status,
            "seed": self.seed,
            "path_index": self.path_index,
            "reg": self.reg,
            "picard_ratios": list(self.picard_ratios),
            "neutral_ratios": list(self.neutral_ratios),
            "outer_errors": list(self.outer_errors),
        }

    def lite(self) -> "SolveReport":
        return replace(self, trajectory=None, law=None)


class _Operators:
    """Per-model tables shared by every Picard sweep."""

    def __init__(self, model: ModelSpec):
        k, n = model.n_steps, model.n_modes
        self.model = model
        self.k = k
        self.kernel = s_alpha_kernel_weights(model.operator, model.alpha, model.delta, k + 1)
        self.t_fac = t_alpha_factors(model.operator, model.alpha, model.times)
        self.phi = model.phi()
        n_hist = self.phi.n_cells
        self.lam = model.operator.eigenvalues
        self.lift = g_lift(model)
        self.has_g = model.g.scale != 0.0
        self.has_f = model.f.kind != "zero" and model.f.amp != 0.0
        # history data with the shared node phi(0) zeroed (it belongs to the states)
        hist = np.vstack([self.phi.values[:-1], np.zeros((k + 1, n))])
        self.g_w = delay_stencil(model.g.kernel_rate, model.delta, n_hist)
        self.f_w = delay_stencil(model.f.rate, model.delta, n_hist)
        if self.has_g:
            self.g_hist = _toeplitz_apply(self.g_w[:, None], hist)[n_hist:]
        if self.has_f:
            fh = f_pointwise(model, self.phi.values[:-1])
            fh = np.vstack([fh, np.zeros((k + 1, fh.shape[1]))])
            self.f_hist = _toeplitz_apply(self.f_w[:, None], fh)[n_hist:]
        self.g_w_traj = self.g_w[: k + 1]
        self.f_w_traj = self.f_w[: k + 1]
        phi0 = self.phi.values[-1]
        g0 = self.g_values(np.broadcast_to(phi0, (k + 1, n)))[0] if self.has_g else np.zeros(n)
        self.free = self.t_fac * (phi0 - g0)

    def g_values(self, x: np.ndarray) -> np.ndarray:
        y = self.g_hist + _toeplitz_apply(self.g_w_traj[:, None], x)
        return self.lift * y

    def f_values(self, x: np.ndarray) -> np.ndarray:
        pts = f_pointwise(self.model, x)
        y = self.f_hist + _toeplitz_apply(self.f_w_traj[:, None], pts)
        return f_project(self.model, y)

    def cell_convolve(self, cells: np.ndarray) -> np.ndarray:
        """int_0^{t_j} k(t_j - s) v(s) ds for v constant on cells, shape (K, N) -> (K+1, N)."""
        out = np.zeros((self.k + 1, cells.shape[1]))
        out[1:] = _toeplitz_apply(self.kernel.mass[: self.k], cells)
        return out

    def neutral(self, x: np.ndarray) -> np.ndarray:
        """Pi_1(x) = g(t, x_t) + int (t-s)^{alpha-1} A S_alpha(t-s) g(s, x_s) ds."""
        if not self.has_g:
            return np.zeros_like(x)
        g = self.g_values(x)
        return g - self.lam * causal_convolve(self.kernel, g)

    def apply(self, x: np.ndarray, fixed: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nu = self.neutral(x)
        out = fixed + nu
        if self.has_f:
            out = out + causal_convolve(self.kernel, self.f_values(x))
        return out, nu


def _operators(model: ModelSpec) -> _Operators:
    key = ("ops", model.n_steps)
    if key not in model._cache:
        model._cache[key] = _Operators(model)
    return model._cache[key]


def sample_noise(model: ModelSpec, seed: int) -> FbmPath:
    grid = FbmGrid(model.t_end, model.n_steps, model.hurst)
    if model.sigma.amp == 0.0:
        return FbmPath(grid, np.zeros((model.n_modes, model.n_steps)), int(seed))
    return sample_qfbm(grid, QCovariance(model.q_eigs()), seed)


def _check_grids(model: ModelSpec, noise: FbmPath | None, law: ControlLaw | None) -> None:
    if noise is not None:
        g = noise.grid
        if g.n_steps != model.n_steps or abs(g.t_end - model.t_end) > 1e-12 or noise.n_modes != model.n_modes:
            raise ValueError("noise path grid does not match the model grid")
    if law is not None and law.values.shape[0] != model.n_steps:
        raise ValueError("control grid does not match the model grid")


def picard_solve(
    model: ModelSpec,
    noise: FbmPath | None,
    law: ControlLaw | None,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> Trajectory:
    """Fixed point of the mild equation; raises NonConvergence after ``max_iter`` sweeps."""
    _check_grids(model, noise, law)
    ops = _operators(model)
    fixed = ops.free.copy()
    if law is not None:
        fixed += ops.cell_convolve(law.forcing(model.b.c))
    if noise is not None and model.sigma.amp != 0.0:
        dB = noise.increments.T / model.delta
        fixed += model.sigma.amp * ops.cell_convolve(dB)

    x = ops.t_fac * ops.phi.values[-1]
    nu_prev = None
    diff_prev = None
    ratios, neutral_ratios = [], []
    for it in range(1, max_iter + 1):
        x_new, nu = ops.apply(x, fixed)
        diff = float(np.max(np.linalg.norm(x_new - x, axis=1)))
        if nu_prev is not None and diff_prev and diff_prev > 0.0:
            ratios.append(diff / diff_prev)
            neutral_ratios.append(float(np.max(np.linalg.norm(nu - nu_prev, axis=1))) / diff_prev)
        nu_prev, diff_prev = nu, diff
        x = x_new
        if diff < tol:
            return Trajectory(model.times, x, ops.phi, it, True, tuple(ratios), tuple(neutral_ratios), diff)
    traj = Trajectory(model.times, x, ops.phi, max_iter, False, tuple(ratios), tuple(neutral_ratios), diff)
    raise NonConvergence(
        f"Picard iteration did not reach tol={tol:g} in {max_iter} sweeps (last step {diff:.3e})",
        traj,
        ratios[-1] if ratios else float("nan"),
    )


def fixed_point_residual(model: ModelSpec, noise, law, traj: Trajectory) -> float:
    """sup_t ||Pi(x) - x|| at a returned trajectory."""
    ops = _operators(model)
    fixed = ops.free.copy()
    if law is not None:
        fixed += ops.cell_convolve(law.forcing(model.b.c))
    if noise is not None and model.sigma.amp != 0.0:
        fixed += model.sigma.amp * ops.cell_convolve(noise.increments.T / model.delta)
    out, _ = ops.apply(traj.states, fixed)
    return float(np.max(np.linalg.norm(out - traj.states, axis=1)))


def _gramian(model: ModelSpec, reg: float) -> Gramian:
    key = ("gramian", model.n_steps, float(reg))
    if key not in model._cache:
        model._cache[key] = build_gramian(model, reg)
    return model._cache[key]


def simulate_controlled(
    model: ModelSpec,
    seed: int,
    reg: float,
    tol: float = 1e-10,
    max_iter: int = 50,
    outer_max: int = 10,
    outer_rtol: float = 1e-2,
    keep: bool = True,
    path_index: int = 0,
) -> SolveReport:
    """Sample noise, solve uncontrolled, then alternate control synthesis and re-solve.

    g and f see the controlled trajectory, so the terminal defect is
    recomputed after every solve: y = x1 - (x(T) - W u).  The loop stops once
    the terminal error changes by less than ``outer_rtol`` (relative), or is
    already at the solver tolerance; otherwise it reports "not_stabilized"
    after ``outer_max`` rounds.  The round with the smallest terminal error
    is returned.  The noise is drawn from path_seed(seed, path_index), so
    Monte Carlo path 0 reproduces a single run with the same seed.
    """
    noise = sample_noise(model, path_seed(seed, path_index))
    gram = _gramian(model, reg)
    target = model.x_target
    base = picard_solve(model, noise, None, tol, max_iter)
    free = base.terminal
    iterations = base.iterations
    floor = 10.0 * tol * max(1.0, float(np.linalg.norm(target)))

    best = None
    errors = []
    status = "not_stabilized"
    prev_err = None
    outer = 0
    for outer in range(1, outer_max + 1):
        law = synthesize_control(model, target - free, gram)
        traj = picard_solve(model, noise, law, tol, max_iter)
        iterations += traj.iterations
        err = float(np.linalg.norm(traj.terminal - target))
        errors.append(err)
        if best is None or err < best[0]:
            best = (err, traj, law)
        free = traj.terminal - apply_w(gram, law.values)
        if err <= floor:
            status = "converged"
            break
        if prev_err is not None and abs(err - prev_err) <= outer_rtol * prev_err:
            status = "stabilized"
            break
        prev_err = err
    err, traj, law = best
    return SolveReport(
        terminal_error=err,
        control_energy=law.energy(),
        picard_ratios=traj.picard_ratios,
        tail_energy=tail_energy(traj.terminal).energy,
        neutral_ratios=traj.neutral_ratios,
        iterations=iterations,
        outer_iterations=outer,
        status=status,
        seed=int(seed),
        path_index=int(path_index),
        reg=float(reg),
        target_norm=float(np.linalg.norm(target)),
        outer_errors=tuple(errors),
        trajectory=traj if keep else None,
        law=law if keep else None,
    )


@dataclass(frozen=True)
class MonteCarloStats:
    n_paths: int
    base_seed: int
    reg: float
    reports: tuple  # per-path SolveReport (without trajectories), index order
    failures: dict

    def _values(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.reports], dtype=float)

    def _moments(self, v: np.ndarray) -> dict:
        n = v.size
        if n == 0:
            return {"mean": float("nan"), "var": float("nan"), "se": float("nan")}
        var = float(v.var(ddof=1)) if n > 1 else 0.0
        return {"mean": float(v.mean()), "var": var, "se": math.sqrt(var / n)}

    @property
    def terminal_error(self) -> dict:
        return self._moments(self._values("terminal_error"))

    @property
    def terminal_error_sq(self) -> dict:
        return self._moments(self._values("terminal_error") ** 2)

    @property
    def control_energy(self) -> dict:
        return self._moments(self._values("control_energy"))

    def summary(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "base_seed": self.base_seed,
            "reg": self.reg,
            "n_ok": len(self.reports),
            "failures": dict(self.failures),
            "terminal_error": self.terminal_error,
            "terminal_error_sq": self.terminal_error_sq,
            "control_energy": self.control_energy,
        }


def _run_path(args):
    model, index, base_seed, reg, tol, max_iter, outer_max, outer_rtol = args
    try:
        rep = simulate_controlled(model, base_seed, reg, tol, max_iter, outer_max, outer_rtol,
                                  keep=False, path_index=index)
        return index, rep, None
    except NonConvergence:
        return index, None, "NonConvergence"
    except (ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
        return index, None, type(exc).__name__


def monte_carlo(
    model: ModelSpec,
    n_paths: int,
    base_seed: int,
    reg: float,
    tol: float = 1e-10,
    max_iter: int = 50,
    outer_max: int = 10,
    outer_rtol: float = 1e-2,
    workers: int = 1,
) -> MonteCarloStats:
    """Independent controlled runs; path i draws its noise from path_seed(base_seed, i).

    Results are merged by path index, so they do not depend on ``workers``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    jobs = [(model, i, base_seed, reg, tol, max_iter, outer_max, outer_rtol) for i in range(n_paths)]
    if workers <= 1:
        results = [_run_path(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_path, jobs, chunksize=max(1, n_paths // (4 * workers))))
    results.sort(key=lambda r: r[0])
    reports = tuple(r[1] for r in results if r[1] is not None)
    failures: dict[str, int] = {}
    for _, rep, err in results:
        if err is not None:
            failures[err] = failures.get(err, 0) + 1
    return MonteCarloStats(n_paths, int(base_seed), float(reg), reports, failures)
