"""Scenario files: TOML with sections [model] [operator] [noise] [control] [history] [solver].

Every key has a default; unknown sections or keys are errors so that typos
cannot silently fall back to defaults.  Coefficient vectors may be given
explicitly (``target``, ``phi``, ``c``) or by power laws amp * n^(-power).
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .spectral import OperatorSpec
from .system import BSpec, FSpec, GSpec, HistorySpec, ModelSpec, PhaseWeight, SigmaSpec

__all__ = ["ConfigError", "Scenario", "load_scenario", "parse_scenario", "shipped_scenario", "SCHEMA"]


class ConfigError(ValueError):
    """Invalid scenario file."""


SCHEMA: dict[str, dict] = {
    "model": {
        "alpha": 0.8, "beta": 2.0 / 3.0, "t_end": 0.5,
        "target": None, "target_amp": 1.0, "target_power": 3.0,
        "g_scale": 1.0, "g_rate": 4.0, "g_sign": 1.0, "g_lipschitz": None,
        "f_kind": "tanh", "f_amp": 1.0, "f_rate": 4.0, "f_kappa": 1.0, "f_colloc": None,
        "f_theta0": None, "f_gamma": None, "f_delta_exp": 2.0,
    },
    "operator": {"n_modes": 16},
    "noise": {"hurst": 0.75, "sigma_amp": 0.0, "q_power": 4.0, "q_scale": 1.0, "p_exp": 2.0},
    "control": {"c": None, "c_amp": 1.0, "c_power": 0.0, "reg": 1e-6},
    "history": {
        "phase_rate": 2.0, "horizon": None,
        "phi": None, "phi_amp": 1.0, "phi_power": 2.0, "phi_rate": 0.0,
    },
    "solver": {
        "n_steps": 1000, "tol": 1e-10, "max_iter": 50, "outer_max": 10, "outer_rtol": 1e-2,
        "seed": 0, "n_paths": 64, "workers": 1,
    },
}


@dataclass(frozen=True)
class Scenario:
    model: ModelSpec
    reg: float
    tol: float
    max_iter: int
    outer_max: int
    outer_rtol: float
    seed: int
    n_paths: int
    workers: int
    config: dict = field(repr=False)
    source: str = ""

    def config_hash(self) -> str:
        """sha256 of the canonical resolved configuration."""
        return hashlib.sha256(_canonical(self.config).encode()).hexdigest()

    def replace(self, **sections) -> "Scenario":
        """New scenario with section keys overridden, e.g. replace(model={"t_end": 0.1})."""
        merged = {k: dict(v) for k, v in self.config.items()}
        for sec, vals in sections.items():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]")
            merged.setdefault(sec, {}).update(vals)
        return parse_scenario(merged, self.source)


def _canonical(d) -> str:
    if isinstance(d, dict):
        return "{" + ",".join(f"{k!r}:{_canonical(d[k])}" for k in sorted(d)) + "}"
    if isinstance(d, (list, tuple)):
        return "[" + ",".join(_canonical(v) for v in d) + "]"
    return repr(d)


def _coeffs(explicit, amp: float, power: float, n: int, name: str) -> np.ndarray:
    if explicit is None:
        return amp * np.arange(1, n + 1, dtype=float) ** (-power)
    arr = np.asarray(explicit, dtype=float)
    if arr.shape[-1] != n:
        raise ConfigError(f"{name} has {arr.shape[-1]} coefficients, expected {n}")
    return arr


def parse_scenario(raw: dict, source: str = "") -> Scenario:
    cfg: dict[str, dict] = {}
    for sec, vals in raw.items():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        if not isinstance(vals, dict):
            raise ConfigError(f"[{sec}] must be a table")
        unknown = set(vals) - set(SCHEMA[sec])
        if unknown:
            raise ConfigError(f"unknown key(s) in [{sec}]: {', '.join(sorted(unknown))}")
    for sec, defaults in SCHEMA.items():
        cfg[sec] = {**defaults, **raw.get(sec, {})}
    m, op, nz, ct, hs, sv = (cfg[s] for s in ("model", "operator", "noise", "control", "history", "solver"))
    try:
        n = int(op["n_modes"])
        operator = OperatorSpec(n)
        weight = PhaseWeight(float(hs["phase_rate"]))
        model = ModelSpec(
            alpha=float(m["alpha"]),
            beta=float(m["beta"]),
            hurst=float(nz["hurst"]),
            t_end=float(m["t_end"]),
            n_steps=int(sv["n_steps"]),
            operator=operator,
            weight=weight,
            g=GSpec(float(m["g_scale"]), float(m["g_rate"]), float(m["g_sign"]),
                    None if m["g_lipschitz"] is None else float(m["g_lipschitz"])),
            f=FSpec(
                kind=str(m["f_kind"]), amp=float(m["f_amp"]), rate=float(m["f_rate"]),
                kappa=float(m["f_kappa"]),
                n_colloc=None if m["f_colloc"] is None else int(m["f_colloc"]),
                theta0=None if m["f_theta0"] is None else float(m["f_theta0"]),
                gamma=None if m["f_gamma"] is None else float(m["f_gamma"]),
                delta_exp=float(m["f_delta_exp"]),
            ),
            sigma=SigmaSpec(float(nz["sigma_amp"]), float(nz["q_power"]), float(nz["q_scale"]),
                            float(nz["p_exp"])),
            b=BSpec(np.atleast_2d(_coeffs(ct["c"], float(ct["c_amp"]), float(ct["c_power"]), n, "c"))),
            history=HistorySpec(
                _coeffs(hs["phi"], float(hs["phi_amp"]), float(hs["phi_power"]), n, "phi"),
                float(hs["phi_rate"]),
                None if hs["horizon"] is None else float(hs["horizon"]),
            ),
            x_target=_coeffs(m["target"], float(m["target_amp"]), float(m["target_power"]), n, "target"),
        )
        scen = Scenario(
            model=model,
            reg=float(ct["reg"]),
            tol=float(sv["tol"]),
            max_iter=int(sv["max_iter"]),
            outer_max=int(sv["outer_max"]),
            outer_rtol=float(sv["outer_rtol"]),
            seed=int(sv["seed"]),
            n_paths=int(sv["n_paths"]),
            workers=int(sv["workers"]),
            config=cfg,
            source=source,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if scen.reg < 0.0 or not math.isfinite(scen.reg):
        raise ConfigError("control.reg must be a finite non-negative number")
    if scen.tol <= 0.0 or scen.max_iter < 1 or scen.outer_max < 1:
        raise ConfigError("solver tol must be positive and iteration caps at least 1")
    if scen.n_paths < 1:
        raise ConfigError("solver.n_paths must be at least 1")
    if scen.workers < 1:
        raise ConfigError("solver.workers must be at least 1")
    return scen


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed scenario {path}: {exc}") from exc
    return parse_scenario(raw, str(path))


def shipped_scenario(name: str = "neutral_heat") -> Scenario:
    """Scenario files bundled with the package."""
    ref = resources.files("fracctrl") / "scenarios" / f"{name}.toml"
    return parse_scenario(tomllib.loads(ref.read_text()), f"<shipped:{name}>")


def with_model(scen: Scenario, **changes) -> Scenario:
    """Replace ModelSpec fields directly (bypassing the file schema)."""
    return dataclasses.replace(scen, model=dataclasses.replace(scen.model, **changes))
