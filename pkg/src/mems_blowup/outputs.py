"""Config files, run summaries and byte-stable CSV/JSON output."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import ConfigError, InitialProfile, SimulationConfig

# config-file key -> SimulationConfig field
KEYS = {
    "lambda": "lam",
    "epsilon": "epsilon",
    "nx": "nx",
    "nz": "nz",
    "dt_init": "dt_init",
    "t_max": "t_max",
    "delta_touch": "delta_touch",
    "grad_max": "grad_max",
    "tol_linear": "tol_linear",
    "cert_factor": "cert_factor",
    "initial_profile": "initial_profile",
    "c_dt": "c_dt",
    "dt_min": "dt_min",
    "cert_every": "cert_every",
    "max_cell_slope": "max_cell_slope",
    "adaptive": "adaptive",
    "small_gap": "small_gap",
}
_FIELD_TYPES = {f.name: f.type for f in fields(SimulationConfig)}


def fmt(value: Any) -> str:
    """17 significant digits for floats; empty string for NaN/None."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return ""
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{float(value):.17g}"
    return str(value)


def parse_profile(text: str) -> InitialProfile:
    text = text.strip()
    if text == "flat":
        return InitialProfile()
    m = re.fullmatch(r"parabolic\(\s*([^)]*)\)", text)
    if m:
        try:
            return InitialProfile("parabolic", c=float(m.group(1)))
        except ValueError:
            raise ConfigError("initial_profile", f"bad parabolic depth {m.group(1)!r}") from None
    m = re.fullmatch(r"table\((.*)\)", text)
    if m:
        pairs = []
        for item in m.group(1).split(","):
            try:
                a, b = item.split(":")
                pairs.append((float(a), float(b)))
            except ValueError:
                raise ConfigError("initial_profile", f"malformed table entry {item.strip()!r}") from None
        return InitialProfile("table", table=tuple(pairs))
    raise ConfigError("initial_profile", f"expected flat, parabolic(c) or table(x:u, ...), got {text!r}")


def _coerce(key: str, raw: Any) -> Any:
    name = KEYS[key]
    if name == "initial_profile":
        return raw if isinstance(raw, InitialProfile) else parse_profile(str(raw))
    kind = _FIELD_TYPES[name]
    try:
        if kind == "bool":
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return text in ("true", "1", "yes")
        if kind == "int":
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot parse value {raw!r}") from None


def read_config_file(path: Path) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def parse_config(path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> SimulationConfig:
    """Defaults, then file values, then ``overrides`` (both keyed by config-file names)."""
    merged: dict[str, Any] = {}
    if path is not None:
        merged.update(read_config_file(path))
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    kwargs = {}
    for key, raw in merged.items():
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
        kwargs[KEYS[key]] = _coerce(key, raw)
    return SimulationConfig(**kwargs)


def config_echo(config: SimulationConfig) -> dict[str, Any]:
    out = {}
    for key, name in KEYS.items():
        value = getattr(config, name)
        out[key] = value.describe() if isinstance(value, InitialProfile) else value
    return out


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def _json(value: Any, indent: int) -> str:
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f'{pad}  "{k}": {_json(v, indent + 1)}' for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        return "[" + ", ".join(_json(v, indent + 1) for v in value) + "]"
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    return fmt(value)


def write_json(path: Path, data: Mapping[str, Any]) -> None:
    Path(path).write_text(_json(dict(data), 0) + "\n")


TRAJECTORY_HEADER = [
    "t", "dt", "min_u", "max_abs_ux", "max_abs_uxx", "E", "dirichlet_energy",
    "slack_b5", "slack_b6", "slack_b7", "slack_b8",
]
CERTIFICATE_HEADER = ["t", "name", "lhs", "rhs", "slack", "tol", "pass", "resolved"]
ATLAS_HEADER = [
    "lambda", "epsilon", "status", "t_event", "T_paper", "T_sharp", "min_final_gap", "worst_slack", "error",
]


def write_trajectory(path: Path, traj) -> None:
    rows = []
    for s in traj.snapshots:
        rows.append([s.t, s.dt, s.min_u, s.max_abs_ux, s.max_abs_uxx, s.E, s.dirichlet_energy,
                     *(s.slacks.get(k, math.nan) for k in ("b5", "b6", "b7", "b8"))])
    write_csv(path, TRAJECTORY_HEADER, rows)


def write_certificates(path: Path, entries) -> None:
    write_csv(path, CERTIFICATE_HEADER,
              ([e.t, e.name, e.lhs, e.rhs, e.slack, e.tol, e.passed, e.resolved] for e in entries))


def run_summary(config: SimulationConfig, traj=None, error: Optional[str] = None) -> dict[str, Any]:
    """Per-run record shared by summary.json and each atlas row."""
    bound = traj.bound if traj is not None else None
    status = traj.status if traj is not None else None
    breakdown = status is not None and status.is_breakdown
    final = traj.final_state if traj is not None else None
    return {
        "lambda": config.lam,
        "epsilon": config.epsilon,
        "status": "failed" if error else (status.kind.value if status else "failed"),
        "t_event": status.t_event if breakdown else None,
        "T_paper": bound.t_paper if bound else None,
        "T_sharp": bound.t_sharp if bound else None,
        "min_final_gap": final.min_gap if final is not None else None,
        "worst_slack": traj.worst_slack if traj is not None else None,
        "error": error or "",
    }


@dataclass(frozen=True)
class Axis:
    start: float
    stop: float
    count: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError("axis", "count must be >= 1")
        if self.spacing not in ("linear", "log"):
            raise ConfigError("axis", f"spacing must be linear or log, got {self.spacing!r}")
        if self.spacing == "log" and (self.start <= 0 or self.stop <= 0):
            raise ConfigError("axis", "log spacing needs positive endpoints")

    @classmethod
    def parse(cls, text: str, key: str = "axis") -> "Axis":
        parts = text.split(":")
        try:
            if len(parts) == 1:
                v = float(parts[0])
                return cls(v, v, 1)
            if len(parts) not in (3, 4):
                raise ValueError
            spacing = parts[3] if len(parts) == 4 else "linear"
            return cls(float(parts[0]), float(parts[1]), int(parts[2]), spacing)
        except ValueError:
            raise ConfigError(key, f"expected start:stop:count[:linear|log], got {text!r}") from None

    def values(self) -> list[float]:
        if self.count == 1:
            return [self.start]
        if self.spacing == "log":
            return list(np.geomspace(self.start, self.stop, self.count))
        return list(np.linspace(self.start, self.stop, self.count))


@dataclass(frozen=True)
class SweepPlan:
    lambda_axis: Axis
    epsilon_axis: Axis
    template: SimulationConfig
    out_dir: Path

    def configs(self) -> list[SimulationConfig]:
        return [
            replace(self.template, lam=float(lam), epsilon=float(eps))
            for lam in self.lambda_axis.values()
            for eps in self.epsilon_axis.values()
        ]
