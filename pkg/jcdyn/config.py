"""Configuration for jcdyn runs.

RunConfig comes from a JSON document merged over DEFAULTS; Settings are runtime options
read from the environment.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .operators import SystemParams
from .thermal import ThermalModel

EMITTABLE = ("spectra", "peaks", "blocks", "ep-map", "coefficients")
SOURCES = ("oracle", "printed", "both")
PEAK_LABELS = ("continuity", "bare")

DEFAULTS: dict[str, Any] = {
    "system": {
        "g": 0.3,
        "kappa": 0.1,
        "gamma_x": 0.001,
        "P_x": 0.06,
        "gamma_theta": 0.0,
    },
    "thermal": {
        "omega_c0": 1043.27,
        "a_idx": 0.852e-5,
        "E_g0": 1044.5,
        "alpha_v": 0.7,
        "beta_v": 590.0,
        "P_tilde": 0.45,
        "A": 0.5,
        "B": 0.2,
        "T_prime": 30.0,
    },
    "sweep": {"T_min": 10.0, "T_max": 50.0, "steps": 81},
    "numerics": {
        "n_max": 8,
        "omega_points": 2001,
        "omega_half_span_over_g": 6.0,
        "time_step": 0.05,
        "min_prominence": 1e-3,
        "fit_peaks": True,
        "peak_labels": "continuity",
    },
    "subspaces": {
        # scaled rates of the sector figures, in units of g
        "kappa_over_g": 0.33,
        "gamma_x_over_g": 0.003,
        "P_tilde_over_g": 1.5,
        "n_list": [1, 2, 3, 4],
        "delta_over_g": {"start": -0.6, "stop": 0.6, "points": 25},
        "p_theta_over_g": {"start": 0.0, "stop": 8.0, "points": 161},
        "coefficient_delta_over_g": 0.33,
        "ep_interval_over_g": [0.0, 8.0],
        "source": "oracle",
    },
    "outputs": {"directory": None, "emit": ["spectra", "peaks"]},
}


def _bool(val: str | None, default: bool = False) -> bool:
    if val is None:
        return default
    return val.strip().lower() in {"1", "true", "yes", "y", "on"}


@dataclass(frozen=True)
class SystemConfig:
    g: float
    kappa: float
    gamma_x: float
    P_x: float
    gamma_theta: float

    def params(self, omega_x: float, omega_c: float, P_theta: float) -> SystemParams:
        return SystemParams(g=self.g, kappa=self.kappa, gamma_x=self.gamma_x, P_x=self.P_x,
                            P_theta=P_theta, omega_x=omega_x, omega_c=omega_c,
                            gamma_theta=self.gamma_theta)


@dataclass(frozen=True)
class ThermalConfig:
    omega_c0: float
    a_idx: float
    E_g0: float
    alpha_v: float
    beta_v: float
    P_tilde: float
    A: float
    B: float
    T_prime: float

    def model(self) -> ThermalModel:
        return ThermalModel(**asdict(self))


@dataclass(frozen=True)
class SweepConfig:
    T_min: float
    T_max: float
    steps: int

    def temperatures(self) -> list[float]:
        width = self.T_max - self.T_min
        return [self.T_min + width * i / (self.steps - 1) for i in range(self.steps)]


@dataclass(frozen=True)
class NumericsConfig:
    n_max: int
    omega_points: int
    omega_half_span_over_g: float
    time_step: float
    min_prominence: float
    fit_peaks: bool
    peak_labels: str = "continuity"


@dataclass(frozen=True)
class GridConfig:
    start: float
    stop: float
    points: int

    def values(self) -> list[float]:
        if self.points == 1:
            return [self.start]
        width = self.stop - self.start
        return [self.start + width * i / (self.points - 1) for i in range(self.points)]


@dataclass(frozen=True)
class SubspaceConfig:
    kappa_over_g: float
    gamma_x_over_g: float
    P_tilde_over_g: float
    n_list: tuple[int, ...]
    delta_over_g: GridConfig
    p_theta_over_g: GridConfig
    coefficient_delta_over_g: float
    ep_interval_over_g: tuple[float, float]
    source: str


@dataclass(frozen=True)
class OutputConfig:
    directory: str | None
    emit: tuple[str, ...]


@dataclass(frozen=True)
class RunConfig:
    system: SystemConfig
    thermal: ThermalConfig
    sweep: SweepConfig
    numerics: NumericsConfig
    subspaces: SubspaceConfig
    outputs: OutputConfig
    raw: dict

    def to_json(self) -> str:
        """Canonical form: sorted keys, fixed separators"""
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()

    def write_resolved(self, directory: Path) -> Path:
        path = Path(directory) / "resolved_config.json"
        path.write_text(json.dumps(self.raw, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return path


@dataclass
class Settings:
    # Output
    out_dir: Path | None
    normalize: bool

    # Execution
    threads: int | None
    log_level: str


def load_settings() -> Settings:
    threads = os.getenv("JCDYN_THREADS")
    if threads and not threads.strip().isdigit():
        raise ConfigError("JCDYN_THREADS", f"expected a positive integer, got {threads!r}")
    out = os.getenv("JCDYN_OUT")
    return Settings(
        out_dir=Path(out) if out else None,
        normalize=_bool(os.getenv("JCDYN_NORMALIZE"), default=False),
        threads=int(threads) if threads else None,
        log_level=os.getenv("JCDYN_LOG_LEVEL", "INFO").upper(),
    )


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(where, "unknown field")
        if isinstance(base[key], dict) and base[key] and not isinstance(value, dict):
            raise ConfigError(where, "expected an object")
        if isinstance(base[key], dict) and base[key]:
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _number(raw: dict, section: str, key: str, minimum: float | None = None, strict: bool = False) -> float:
    value = raw[section][key]
    where = f"{section}.{key}"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(where, f"expected a number, got {value!r}")
    if minimum is not None and (value < minimum or (strict and value == minimum)):
        op = ">" if strict else ">="
        raise ConfigError(where, f"must be {op} {minimum}, got {value}")
    return float(value)


def _integer(value: Any, where: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(where, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(where, f"must be >= {minimum}, got {value}")
    return value


def _grid(value: Any, where: str) -> GridConfig:
    if not isinstance(value, dict) or set(value) != {"start", "stop", "points"}:
        raise ConfigError(where, "expected {start, stop, points}")
    points = _integer(value["points"], f"{where}.points", 1)
    start, stop = value["start"], value["stop"]
    for key, v in (("start", start), ("stop", stop)):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{where}.{key}", f"expected a number, got {v!r}")
    if points > 1 and not stop > start:
        raise ConfigError(where, "stop must exceed start")
    return GridConfig(float(start), float(stop), points)


def validate(raw: dict) -> RunConfig:
    """Build a RunConfig from a fully merged document; raises ConfigError naming the field"""
    system = SystemConfig(**{k: _number(raw, "system", k, minimum=0.0) for k in raw["system"]})
    if system.g == 0 and system.kappa == 0:
        raise ConfigError("system.kappa", "must be > 0 when g = 0")

    th = raw["thermal"]
    for key in th:
        _number(raw, "thermal", key)
    for key in ("A", "B", "beta_v"):
        _number(raw, "thermal", key, minimum=0.0, strict=True)
    _number(raw, "thermal", "P_tilde", minimum=0.0)
    thermal = ThermalConfig(**{k: float(v) for k, v in th.items()})

    T_min = _number(raw, "sweep", "T_min", minimum=0.0)
    T_max = _number(raw, "sweep", "T_max")
    if not T_min < T_max:
        raise ConfigError("sweep.T_max", f"must exceed T_min={T_min}, got {T_max}")
    sweep = SweepConfig(T_min, T_max, _integer(raw["sweep"]["steps"], "sweep.steps", 2))

    num = raw["numerics"]
    fit = num["fit_peaks"]
    if not isinstance(fit, bool):
        raise ConfigError("numerics.fit_peaks", f"expected true or false, got {fit!r}")
    if num["peak_labels"] not in PEAK_LABELS:
        raise ConfigError("numerics.peak_labels", f"expected one of {PEAK_LABELS}, got {num['peak_labels']!r}")
    numerics = NumericsConfig(
        n_max=_integer(num["n_max"], "numerics.n_max", 2),
        omega_points=_integer(num["omega_points"], "numerics.omega_points", 3),
        omega_half_span_over_g=_number(raw, "numerics", "omega_half_span_over_g", minimum=0.0, strict=True),
        time_step=_number(raw, "numerics", "time_step", minimum=0.0, strict=True),
        min_prominence=_number(raw, "numerics", "min_prominence", minimum=0.0),
        fit_peaks=fit,
        peak_labels=num["peak_labels"],
    )

    sub = raw["subspaces"]
    n_list = sub["n_list"]
    if not isinstance(n_list, list) or not n_list:
        raise ConfigError("subspaces.n_list", "expected a non-empty list of rungs")
    n_list = tuple(_integer(n, "subspaces.n_list", 1) for n in n_list)
    interval = sub["ep_interval_over_g"]
    if (not isinstance(interval, list) or len(interval) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in interval)
            or not 0 <= interval[0] < interval[1]):
        raise ConfigError("subspaces.ep_interval_over_g", f"expected [lo, hi] with 0 <= lo < hi, got {interval!r}")
    if sub["source"] not in SOURCES:
        raise ConfigError("subspaces.source", f"expected one of {SOURCES}, got {sub['source']!r}")
    subspaces = SubspaceConfig(
        kappa_over_g=_number(raw, "subspaces", "kappa_over_g", minimum=0.0),
        gamma_x_over_g=_number(raw, "subspaces", "gamma_x_over_g", minimum=0.0),
        P_tilde_over_g=_number(raw, "subspaces", "P_tilde_over_g", minimum=0.0),
        n_list=n_list,
        delta_over_g=_grid(sub["delta_over_g"], "subspaces.delta_over_g"),
        p_theta_over_g=_grid(sub["p_theta_over_g"], "subspaces.p_theta_over_g"),
        coefficient_delta_over_g=_number(raw, "subspaces", "coefficient_delta_over_g"),
        ep_interval_over_g=(float(interval[0]), float(interval[1])),
        source=sub["source"],
    )
    if subspaces.p_theta_over_g.start < 0:
        raise ConfigError("subspaces.p_theta_over_g.start", "must be >= 0")

    out = raw["outputs"]
    emit = out["emit"]
    if not isinstance(emit, list) or any(e not in EMITTABLE for e in emit):
        raise ConfigError("outputs.emit", f"expected a list drawn from {EMITTABLE}, got {emit!r}")
    directory = out["directory"]
    if directory is not None and not isinstance(directory, str):
        raise ConfigError("outputs.directory", f"expected a path string, got {directory!r}")
    outputs = OutputConfig(directory=directory, emit=tuple(emit))

    return RunConfig(system=system, thermal=thermal, sweep=sweep, numerics=numerics,
                     subspaces=subspaces, outputs=outputs, raw=raw)


def load_config(source: str | Path | dict) -> RunConfig:
    """Read a JSON config (path or already parsed dict) and validate it over DEFAULTS"""
    if isinstance(source, dict):
        document = source
    else:
        path = Path(source)
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise ConfigError("config", f"file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"invalid JSON in {path}: {e}") from e
    if not isinstance(document, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return validate(_merge(DEFAULTS, document))
