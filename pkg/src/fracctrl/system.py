"""Model definition: phase space with exponential weight, neutral map g,
distributed-delay nonlinearity f, noise coefficient and control injection.

Histories live on a uniform grid over [-tau_hist, 0]; the infinite delay is
truncated there and the neglected weight tail is reported as slack.  Delay
integrals are product-trapezoidal sums with exact exponential weights,
the same routine the solver uses for its convolutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import exp_kernel_weights
from .spectral import OperatorSpec, SpectralField, eigenfunctions

__all__ = [
    "PhaseWeight",
    "HistorySegment",
    "GSpec",
    "FSpec",
    "SigmaSpec",
    "BSpec",
    "HistorySpec",
    "ModelSpec",
    "phase_norm",
    "phase_norm_with_slack",
    "ensemble_phase_norm",
    "delay_stencil",
    "eval_g",
    "eval_f",
    "eval_b",
    "g_lift",
]


@dataclass(frozen=True)
class PhaseWeight:
    """h(s) = exp(rate * s) on s <= 0, with mass l = 1/rate."""

    rate: float = 2.0

    def __post_init__(self) -> None:
        if not self.rate > 0.0:
            raise ValueError(f"phase weight rate must be positive, got {self.rate}")

    @property
    def l(self) -> float:
        return 1.0 / self.rate

    def tail(self, horizon: float) -> float:
        """int_{-inf}^{-horizon} h(s) ds."""
        return math.exp(-self.rate * horizon) / self.rate


@dataclass(frozen=True)
class HistorySegment:
    """Field values on the uniform grid -horizon = theta_0 < ... < theta_L = 0."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("history grid needs at least two points")
        if abs(grid[-1]) > 1e-12 * max(1.0, abs(grid[0])):
            raise ValueError("history grid must end at 0")
        steps = np.diff(grid)
        if np.any(steps <= 0.0) or np.ptp(steps) > 1e-9 * steps.mean():
            raise ValueError("history grid must be uniform and increasing")
        if values.ndim != 2 or values.shape[0] != grid.size:
            raise ValueError("history values must have shape (grid points, modes)")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def horizon(self) -> float:
        return float(-self.grid[0])

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def n_cells(self) -> int:
        return self.grid.size - 1

    @property
    def n_modes(self) -> int:
        return self.values.shape[1]

    @property
    def present(self) -> SpectralField:
        """psi(0)."""
        return SpectralField(self.values[-1])

    @classmethod
    def from_function(cls, func, horizon: float, step: float) -> "HistorySegment":
        """Sample ``func(theta) -> coefficient rows`` on [-horizon, 0]."""
        n = int(round(horizon / step))
        grid = step * np.arange(-n, 1)
        return cls(grid, np.atleast_2d(func(grid)))


def _envelope_integral(seg: HistorySegment, norms: np.ndarray, rate: float):
    # int_{-tau}^0 e^{rate t} sup_{t<=s<=0} n(s) dt, envelope interpolated linearly
    env = np.maximum.accumulate(norms[::-1])  # lag order: env[m] at theta = -m*step
    w = exp_kernel_weights(rate, seg.step, seg.n_cells).stencil()
    value = float(np.dot(w, env))
    return value, float(env[-1])


def phase_norm_with_slack(seg: HistorySegment, weight: PhaseWeight) -> tuple[float, float]:
    """Truncated B_h norm of a deterministic segment, and a bound on the neglected tail.

    The true norm lies in [value, value + slack] whenever the field stays below
    its sampled supremum beyond the horizon.
    """
    norms = np.linalg.norm(seg.values, axis=1)
    value, sup = _envelope_integral(seg, norms, weight.rate)
    return value, weight.tail(seg.horizon) * sup


def phase_norm(seg: HistorySegment, weight: PhaseWeight) -> float:
    """int_{-tau}^0 h(t) sup_{t<=s<=0} ||psi(s)|| dt on the stored horizon."""
    return phase_norm_with_slack(seg, weight)[0]


def ensemble_phase_norm(segments, weight: PhaseWeight) -> tuple[float, float]:
    """Stochastic B_h norm: sup over (E||psi(s)||^2)^{1/2} estimated across replicas."""
    segments = list(segments)
    if not segments:
        raise ValueError("need at least one replica")
    sq = np.mean([np.sum(s.values**2, axis=1) for s in segments], axis=0)
    value, sup = _envelope_integral(segments[0], np.sqrt(sq), weight.rate)
    return value, weight.tail(segments[0].horizon) * sup


@dataclass(frozen=True)
class GSpec:
    """(-A)^beta g(t, phi) = scale * int w(theta) phi(theta) dtheta, w = exp(sign*rate*theta).

    ``sign = +1`` gives the integrable kernel used by default; ``sign = -1``
    reproduces the growing kernel exp(-rate*theta) on the truncated horizon.
    ``lipschitz`` pins an analytic M_g; by default it is derived from the kernel.
    """

    scale: float = 1.0
    rate: float = 4.0
    sign: float = 1.0
    lipschitz: float | None = None

    def __post_init__(self) -> None:
        if self.sign not in (1.0, -1.0):
            raise ValueError("g kernel sign must be +1 or -1")
        if self.rate < 0.0:
            raise ValueError("g kernel rate must be non-negative")

    @property
    def kernel_rate(self) -> float:
        """Decay rate of the kernel in the lag variable -theta."""
        return self.sign * self.rate


F_KINDS = ("tanh", "identity", "zero")


@dataclass(frozen=True)
class FSpec:
    """f(t, phi)(xi) = amp * kappa * int exp(rate*theta) f1(phi(theta)(xi)) dtheta.

    f1 acts pointwise on ``n_colloc`` interior collocation points of [0, pi]
    and the result is projected back onto the sine basis.  The growth bound
    ||f||^2 <= p * theta(||phi||^2_B) uses p = (amp*kappa)^2 and
    theta(k) = theta0 + gamma*k; unset values are derived from ``kind``.
    """

    kind: str = "tanh"
    amp: float = 1.0
    rate: float = 4.0
    kappa: float = 1.0
    n_colloc: int | None = None
    theta0: float | None = None
    gamma: float | None = None
    delta_exp: float = 2.0

    def __post_init__(self) -> None:
        if self.kind not in F_KINDS:
            raise ValueError(f"f kind must be one of {F_KINDS}, got {self.kind!r}")
        if not self.rate > 0.0:
            raise ValueError("f kernel rate must be positive")

    def f1(self, v: np.ndarray) -> np.ndarray:
        if self.kind == "tanh":
            return np.tanh(v)
        if self.kind == "identity":
            return v
        return np.zeros_like(v)

    @property
    def p_const(self) -> float:
        return (self.amp * self.kappa) ** 2

    def growth(self, weight: PhaseWeight) -> tuple[float, float]:
        """(theta0, gamma) of the affine growth function."""
        if self.kind == "tanh":
            # |tanh| <= 1: ||f|| <= amp*kappa*sqrt(pi)/rate
            default = (math.pi / self.rate**2, 0.0)
        elif self.kind == "identity":
            # exp(rate*theta) <= h(theta) needs rate >= the phase rate; then
            # ||f|| <= amp*kappa*||phi||_B
            default = (0.0, 1.0 if self.rate >= weight.rate else float("inf"))
        else:
            default = (0.0, 0.0)
        theta0 = default[0] if self.theta0 is None else self.theta0
        gamma = default[1] if self.gamma is None else self.gamma
        return theta0, gamma


@dataclass(frozen=True)
class SigmaSpec:
    """sigma(t) = amp * I on the retained modes; Q eigenvalues q_scale * n^(-q_power)."""

    amp: float = 0.0
    q_power: float = 4.0
    q_scale: float = 1.0
    p_exp: float = 2.0


@dataclass(frozen=True)
class BSpec:
    """Control profiles c_j(xi) as coefficient rows, shape (channels, modes)."""

    c: np.ndarray

    def __post_init__(self) -> None:
        c = np.atleast_2d(np.asarray(self.c, dtype=float))
        if c.ndim != 2 or not np.all(np.isfinite(c)):
            raise ValueError("control profile must be a finite (channels, modes) array")
        object.__setattr__(self, "c", c)

    @property
    def n_channels(self) -> int:
        return self.c.shape[0]

    def norm_sq(self) -> float:
        """||B||^2 = largest squared singular value (= ||c||^2 for one channel)."""
        return float(np.linalg.norm(self.c, 2) ** 2)


@dataclass(frozen=True)
class HistorySpec:
    """phi(theta) = coeffs * exp(rate * theta) on [-horizon, 0]."""

    coeffs: np.ndarray
    rate: float = 0.0
    horizon: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float).ravel())

    def segment(self, step: float, weight: PhaseWeight) -> HistorySegment:
        horizon = 10.0 / weight.rate if self.horizon is None else self.horizon
        n = int(math.ceil(horizon / step - 1e-9))
        return HistorySegment.from_function(
            lambda th: np.exp(self.rate * th)[:, None] * self.coeffs[None, :], n * step, step
        )


@dataclass(frozen=True)
class ModelSpec:
    alpha: float
    beta: float
    hurst: float
    t_end: float
    n_steps: int
    operator: OperatorSpec
    weight: PhaseWeight
    g: GSpec
    f: FSpec
    sigma: SigmaSpec
    b: BSpec
    history: HistorySpec
    x_target: np.ndarray
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not 0.5 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (1/2, 1), got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.alpha * self.beta > 0.5:
            raise ValueError(f"alpha*beta must exceed 1/2, got {self.alpha * self.beta}")
        if not 0.5 < self.hurst < 1.0:
            raise ValueError(f"hurst must lie in (1/2, 1), got {self.hurst}")
        if not self.t_end > 0.0:
            raise ValueError("t_end must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")
        n = self.operator.n_modes
        target = np.asarray(self.x_target, dtype=float).ravel()
        if target.size != n:
            raise ValueError(f"target has {target.size} coefficients, model has {n} modes")
        object.__setattr__(self, "x_target", target)
        if self.b.c.shape[1] != n:
            raise ValueError("control profile does not match the number of modes")
        if self.history.coeffs.size != n:
            raise ValueError("initial history does not match the number of modes")

    def __getstate__(self):
        # caches hold large derived tables; workers rebuild them
        state = self.__dict__.copy()
        state["_cache"] = {}
        return state

    def __setstate__(self, state) -> None:
        self.__dict__.update(state)

    @property
    def n_modes(self) -> int:
        return self.operator.n_modes

    @property
    def delta(self) -> float:
        return self.t_end / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.delta * np.arange(self.n_steps + 1)

    def phi(self) -> HistorySegment:
        """Initial history on the solver grid."""
        key = ("phi", self.n_steps)
        if key not in self._cache:
            self._cache[key] = self.history.segment(self.delta, self.weight)
        return self._cache[key]

    def colloc(self) -> tuple[np.ndarray, np.ndarray]:
        """Collocation points xi_j = j*pi/(J+1) and the basis matrix e_n(xi_j)."""
        j = self.f.n_colloc or max(2 * self.n_modes, 32)
        if j < self.n_modes:
            raise ValueError("need at least as many collocation points as modes")
        xi = math.pi * np.arange(1, j + 1) / (j + 1)
        return xi, eigenfunctions(self.n_modes, xi)

    def q_eigs(self) -> np.ndarray:
        n = self.operator.modes
        return self.sigma.q_scale * n ** (-self.sigma.q_power)


def g_lift(model: ModelSpec) -> np.ndarray:
    """Per-mode multiplier scale * n^{-2 beta} taking the delay integral to g."""
    return model.g.scale * model.operator.eigenvalues ** (-model.beta)


def delay_stencil(rate: float, step: float, n_cells: int) -> np.ndarray:
    """Node weights, in lag order, of int_{-tau}^0 exp(rate*theta) psi(theta) dtheta."""
    return exp_kernel_weights(rate, step, n_cells).stencil()


def _segment_integral(seg: HistorySegment, rate: float, values: np.ndarray) -> np.ndarray:
    w = delay_stencil(rate, seg.step, seg.n_cells)
    return w @ values[::-1]


def eval_g(model: ModelSpec, t: float, seg: HistorySegment) -> SpectralField:
    """g(t, phi) = (-A)^{-beta} scale * int w(theta) phi(theta) dtheta; g does not depend on t."""
    y = _segment_integral(seg, model.g.kernel_rate, seg.values)
    return SpectralField(g_lift(model) * y)


def f_pointwise(model: ModelSpec, values: np.ndarray) -> np.ndarray:
    """f1 applied at the collocation points; rows are times, columns points."""
    _, basis = model.colloc()
    return model.f.f1(values @ basis)


def f_project(model: ModelSpec, pointwise: np.ndarray) -> np.ndarray:
    """amp * kappa * discrete sine projection of pointwise values back to coefficients."""
    xi, basis = model.colloc()
    scale = model.f.amp * model.f.kappa * math.pi / (xi.size + 1)
    return scale * (pointwise @ basis.T)


def eval_f(model: ModelSpec, t: float, seg: HistorySegment) -> SpectralField:
    """f(t, phi): delay integral of f1(phi(theta)) followed by projection; time independent."""
    if model.f.kind == "zero" or model.f.amp == 0.0:
        return SpectralField(np.zeros(model.n_modes))
    integrated = _segment_integral(seg, model.f.rate, f_pointwise(model, seg.values))
    return SpectralField(f_project(model, integrated))


def eval_b(model: ModelSpec, u_val) -> SpectralField:
    """B u = sum_j u_j c_j."""
    u = np.atleast_1d(np.asarray(u_val, dtype=float))
    if u.size != model.b.n_channels:
        raise ValueError(f"control has {u.size} channels, model expects {model.b.n_channels}")
    return SpectralField(u @ model.b.c)
