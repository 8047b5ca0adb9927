"""Constants of the standing hypotheses and the sufficient condition for controllability.

The condition checked by ``check_h6`` is, with l the phase-weight mass,

    24 l^2 { A M_g + gamma (1 + C) (M^2 T / Gamma(alpha)^2) P + C A M_g } < 1,

    A = c1^2 + T^{2 alpha beta} alpha^2 M_{1-beta}^2 Gamma(beta+1)^2
               / ((2 alpha beta - 1) Gamma(alpha beta + 1)^2),
    C = 6 M^2 M_b M_w T^{2 alpha} / ((2 alpha - 1) Gamma(alpha)^2),
    P = int_0^T (T - s)^{2 alpha - 2} p(s) ds.

The neutral part of the fixed-point map contracts (mean-square) with

    nu = 4 M_g l^2 { c1^2 + 2 alpha^2 M_{1-beta}^2 Gamma(beta+1)^2 T^{2 alpha beta}
                     / (Gamma(alpha beta + 1)^2 (2 alpha beta - 1)) }.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .control import Gramian
from .fraccalc import SampledFn, rl_integral
from .spectral import semigroup_power_bound, s_alpha_power_bound
from .system import HistorySegment, ModelSpec, eval_g, g_lift, phase_norm

__all__ = [
    "HypothesisConstants",
    "H6Result",
    "estimate_constants",
    "check_h6",
    "check_h6_step1",
    "contraction_nu",
    "p_integral",
    "hypothesis_table",
    "empirical_mg",
]


@dataclass(frozen=True)
class HypothesisConstants:
    M: float
    M_1mb: float
    c1: float
    Mg: float
    Mb: float
    Mw: float
    l: float
    gamma: float
    delta_exp: float
    p_exp: float
    alpha: float
    beta: float
    hurst: float
    t_end: float
    Mg_empirical: float = 0.0

    def __post_init__(self) -> None:
        for name in ("M", "M_1mb", "c1", "Mg", "Mb", "Mw", "l", "gamma", "t_end", "Mg_empirical"):
            v = getattr(self, name)
            if not (v >= 0.0) or math.isnan(v):
                raise ValueError(f"constant {name} must be non-negative, got {v}")

    def scaled(self, **factors) -> "HypothesisConstants":
        """Copy with named constants multiplied, e.g. scaled(Mg=1e6)."""
        d = asdict(self)
        for k, f in factors.items():
            d[k] = d[k] * f
        return HypothesisConstants(**d)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class H6Result:
    lhs: float
    holds: bool
    step1_lhs: float
    terms: dict


def _a_term(k: HypothesisConstants) -> float:
    ab = k.alpha * k.beta
    return k.c1**2 + (
        k.t_end ** (2 * ab) * k.alpha**2 * k.M_1mb**2 * math.gamma(k.beta + 1) ** 2
        / ((2 * ab - 1) * math.gamma(ab + 1) ** 2)
    )


def _c_term(k: HypothesisConstants) -> float:
    return (6 * k.M**2 * k.Mb * k.Mw * k.t_end ** (2 * k.alpha)
            / ((2 * k.alpha - 1) * math.gamma(k.alpha) ** 2))


def check_h6(k: HypothesisConstants, p_int: float) -> H6Result:
    """Left side of the sufficient condition, evaluated as printed; holds iff lhs < 1."""
    if 2 * k.alpha * k.beta <= 1 or 2 * k.alpha <= 1:
        raise ValueError("the condition needs 2*alpha*beta > 1 and 2*alpha > 1")
    a = _a_term(k)
    c = _c_term(k)
    neutral = a * k.Mg
    growth = k.gamma * (1 + c) * (k.M**2 * k.t_end / math.gamma(k.alpha) ** 2) * p_int
    control = c * a * k.Mg
    lhs = 24 * k.l**2 * (neutral + growth + control)
    return H6Result(
        lhs=lhs,
        holds=bool(lhs < 1.0),
        step1_lhs=check_h6_step1(k, p_int),
        terms={"neutral": 24 * k.l**2 * neutral, "growth": 24 * k.l**2 * growth,
               "control": 24 * k.l**2 * control, "A": a, "C": c},
    )


def check_h6_step1(k: HypothesisConstants, p_int: float) -> float:
    """The same bound as it appears at the end of the growth estimate (144 l^2 grouping)."""
    ab = k.alpha * k.beta
    g2 = math.gamma(k.alpha) ** 2
    frac = (k.t_end ** (2 * ab) * k.alpha**2 * k.M_1mb**2 * math.gamma(k.beta + 1) ** 2
            / ((2 * ab - 1) * math.gamma(ab + 1) ** 2))
    six = 6 * k.M**2 * k.Mb * k.Mw * k.t_end ** (2 * k.alpha) / ((2 * k.alpha - 1) * g2)
    big = 144 * k.M**2 * k.Mb * k.Mw * k.t_end ** (2 * k.alpha) / ((2 * k.alpha - 1) * g2)
    return (24 * k.l**2 * k.c1**2 * k.Mg
            + 24 * k.l**2 * frac * k.Mg
            + 24 * k.l**2 * k.gamma * (1 + six) * (k.M**2 * k.t_end / g2) * p_int
            + big * (k.c1**2 + frac) * k.Mg * k.l**2)


def contraction_nu(k: HypothesisConstants) -> float:
    ab = k.alpha * k.beta
    if 2 * ab <= 1:
        raise ValueError(f"contraction constant needs 2*alpha*beta > 1, got {2 * ab}")
    bracket = k.c1**2 + (2 * k.alpha**2 * k.M_1mb**2 * math.gamma(k.beta + 1) ** 2
                         * k.t_end ** (2 * ab) / (math.gamma(ab + 1) ** 2 * (2 * ab - 1)))
    return 4 * k.Mg * k.l**2 * bracket


def p_integral(model: ModelSpec, n_steps: int = 2048) -> float:
    """int_0^T (T-s)^{2 alpha - 2} p(s) ds = Gamma(2 alpha - 1) J^{2 alpha - 1} p (T)."""
    order = 2 * model.alpha - 1
    f = SampledFn.from_function(lambda t: np.full_like(t, model.f.p_const), model.t_end, n_steps)
    return math.gamma(order) * float(rl_integral(f, order).values[-1])


def analytic_mg(model: ModelSpec) -> float:
    """M_g = (scale * max_theta w(theta)/h(theta))^2 on the stored horizon.

    ||int w phi|| <= max(w/h) int h ||phi(theta)|| dtheta <= max(w/h) ||phi||_B,
    and the lift cancels the (-A)^beta in the hypothesis.
    """
    if model.g.lipschitz is not None:
        return float(model.g.lipschitz)
    gap = model.weight.rate - model.g.kernel_rate  # w/h = exp(-gap * theta) on theta <= 0
    horizon = model.phi().horizon
    ratio = 1.0 if gap <= 0.0 else math.exp(gap * horizon)
    return (model.g.scale * ratio) ** 2


def empirical_mg(model: ModelSpec, n_pairs: int = 64, seed: int = 0) -> float:
    """Largest observed ||(-A)^beta (g(phi1) - g(phi2))||^2 / ||phi1 - phi2||_B^2 (a lower bound)."""
    rng = np.random.default_rng(seed)
    seg0 = model.phi()
    lift = g_lift(model)
    powered = np.where(lift != 0.0, model.operator.eigenvalues**model.beta, 0.0)
    best = 0.0
    theta = seg0.grid
    for _ in range(n_pairs):
        # random smooth differences: a few decaying exponentials per mode
        rates = rng.uniform(0.0, 6.0, size=3)
        amps = rng.standard_normal((3, model.n_modes)) / model.operator.modes
        diff = np.exp(np.outer(theta, rates)) @ amps
        seg = HistorySegment(theta, diff)
        den = phase_norm(seg, model.weight) ** 2
        if den == 0.0:
            continue
        num = float(np.sum((powered * eval_g(model, 0.0, seg).coeffs) ** 2))
        if not math.isfinite(num):
            raise ArithmeticError("non-finite value while sampling M_g")
        best = max(best, num / den)
    return best


def estimate_constants(model: ModelSpec, gramian: Gramian, seed: int = 0) -> HypothesisConstants:
    """Constants for a spectral model; deterministic given (model, gramian, seed).

    ``Mg`` is the analytic kernel bound (or the pinned value) so that the
    condition is checked with a true upper bound; ``Mg_empirical`` is the
    sampled lower bound and never exceeds it.
    """
    delta = 1.0 - model.beta
    m_1mb = semigroup_power_bound(model.operator, delta).constant
    lam_min = float(np.linalg.eigvalsh(gramian.regularized)[0])
    mw = 1.0 / lam_min if lam_min > 0.0 else float("inf")
    _, gamma = model.f.growth(model.weight)
    thresh = 1.0 / (2 * model.alpha - 1)
    return HypothesisConstants(
        M=1.0,
        M_1mb=m_1mb,
        c1=float(np.max(model.operator.eigenvalues ** (-model.beta))),
        Mg=analytic_mg(model),
        Mb=model.b.norm_sq(),
        Mw=mw,
        l=model.weight.l,
        gamma=gamma,
        delta_exp=model.f.delta_exp if model.f.delta_exp is not None else 2 * thresh,
        p_exp=model.sigma.p_exp if model.sigma.p_exp is not None else 2 * thresh,
        alpha=model.alpha,
        beta=model.beta,
        hurst=model.hurst,
        t_end=model.t_end,
        Mg_empirical=empirical_mg(model, seed=seed),
    )


def hypothesis_table(model: ModelSpec, k: HypothesisConstants, p_int: float) -> dict:
    """Pass/fail of each checkable hypothesis plus the condition's left side and nu."""
    thresh = 1.0 / (2 * k.alpha - 1)
    h6 = check_h6(k, p_int)
    s_fit = s_alpha_power_bound(model.operator, k.alpha, 1.0 - k.beta)
    rows = {
        "H1": {"holds": k.M >= 1.0 and math.isfinite(k.c1), "M": k.M, "c1": k.c1},
        "H2": {"holds": k.delta_exp > thresh and math.isfinite(k.gamma),
               "delta_exp": k.delta_exp, "threshold": thresh, "gamma": k.gamma,
               "p_const": model.f.p_const},
        "H3": {"holds": k.alpha * k.beta > 0.5 and math.isfinite(k.Mg), "Mg": k.Mg,
               "Mg_empirical": k.Mg_empirical},
        "H4": {"holds": k.p_exp > thresh, "p_exp": k.p_exp, "threshold": thresh},
        "H5": {"holds": math.isfinite(k.Mw) and math.isfinite(k.Mb), "Mb": k.Mb, "Mw": k.Mw},
        "H6": {"holds": h6.holds, "lhs": h6.lhs, "step1_lhs": h6.step1_lhs, **h6.terms},
    }
    return {
        "constants": k.as_dict(),
        "p_integral": p_int,
        "hypotheses": rows,
        "nu": contraction_nu(k),
        "M_1mb_analytic": semigroup_power_bound(model.operator, 1.0 - k.beta).analytic,
        "M_delta_s_alpha": s_fit.constant,
        "all_hold": all(r["holds"] for r in rows.values()),
    }
