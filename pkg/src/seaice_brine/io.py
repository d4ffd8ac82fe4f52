"""Configuration parsing and file output (CSV frames, JSON reports)."""
from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .model import ModelParams

FRAME_HEADER = ("tau", "s", "r_mm", "x3_mm")
FIELD_HEADER = ("time", "x", "phi", "theta", "rho")
PORE_HEADER = ("x3_mm", "r_mm", "dr_dx3")


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key."""


def fmt(x: float) -> str:
    """17 significant digits: exact round trip for doubles."""
    return format(float(x), ".17g")


@dataclass
class RunConfig:
    """Flat command configuration; ``params`` holds ModelParams overrides."""

    params: dict = field(default_factory=dict)
    output_dir: str = "out"
    scenario: Any = None
    save_every_steps: int = 100
    # equilibrium pore
    r0: float = 2.0
    a0: float = -4.0
    b0: float | None = None
    x3_max: float = 50.0
    # 1-D phase field
    n_cells: int = 400
    domain_length: float = 2.0
    n_steps: int = 2000
    x_front: float = 1.0
    theta0: float = 273.0
    rho0: float = 1.0

    def __post_init__(self):
        try:
            ModelParams.from_dict(self.params)
        except KeyError as exc:
            raise ConfigError(str(exc).strip("'\"")) from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"params: {exc}") from None

    def model_params(self) -> ModelParams:
        return ModelParams.from_dict(self.params)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(names))
        if unknown:
            raise ConfigError(f"unknown config key: {unknown[0]}")
        if "params" in data and not isinstance(data["params"], dict):
            raise ConfigError("params must be an object")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    def apply_override(self, assignment: str) -> "RunConfig":
        """Apply ``key=value``; ModelParams fields go to ``params``."""
        if "=" not in assignment:
            raise ConfigError(f"override must look like key=value: {assignment!r}")
        key, raw = assignment.split("=", 1)
        key = key.strip()
        value = _parse_value(raw.strip())
        param_fields = {f.name for f in dataclasses.fields(ModelParams)}
        own = {f.name for f in dataclasses.fields(self)} - {"params"}
        if key.startswith("params."):
            key = key[len("params."):]
            if key not in param_fields:
                raise ConfigError(f"unknown config key: params.{key}")
        if key in param_fields:
            return RunConfig.from_dict({**self.to_dict(), "params": {**self.params, key: value}})
        if key in own:
            return RunConfig.from_dict({**self.to_dict(), key: value})
        raise ConfigError(f"unknown config key: {key}")


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def load_config(path: str | Path | None, overrides=()) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from None
        cfg = RunConfig.from_json(text)
    for item in overrides:
        cfg = cfg.apply_override(item)
    return cfg


# --- writers ------------------------------------------------------------------------

def _open_for_write(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_frames(path, frames) -> None:
    """Curve frames (BrineState objects) as long-format ``tau,s,r_mm,x3_mm``."""
    path = Path(path)
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FRAME_HEADER)
        for f in frames:
            c = f.curve
            for s, r, x in zip(c.s_nodes, c.r, c.x3):
                w.writerow((fmt(f.tau), fmt(s), fmt(r), fmt(x)))


def read_frames(path) -> dict:
    """Inverse of :func:`write_frames`: ``{tau: (s, r, x3)}``."""
    out: dict = {}
    with Path(path).open() as fh:
        rd = csv.reader(fh)
        header = tuple(next(rd))
        if header != FRAME_HEADER:
            raise ValueError(f"unexpected header {header}")
        for row in rd:
            t, s, r, x = map(float, row)
            out.setdefault(t, ([], [], []))
            for lst, v in zip(out[t], (s, r, x)):
                lst.append(v)
    return {t: tuple(np.array(v) for v in cols) for t, cols in out.items()}


def write_pore_profile(path, profile) -> None:
    path = Path(path)
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PORE_HEADER)
        for x, r, d in zip(profile.x3, profile.r, profile.dr):
            w.writerow((fmt(x), fmt(r), fmt(d)))


def write_field_frames(path, frames, diagnostics=()) -> None:
    """Phase-field frames as ``time,x,phi,theta,rho`` plus one JSON sidecar per frame."""
    path = Path(path)
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELD_HEADER)
        for f in frames:
            for x, p, th, rh in zip(f.grid.x, f.phi, f.theta, f.rho):
                w.writerow((fmt(f.time), fmt(x), fmt(p), fmt(th), fmt(rh)))
    for k, (f, d) in enumerate(zip(frames, diagnostics)):
        side = path.with_name(f"{path.stem}.frame{k:05d}.json")
        write_json(side, {"frame": k, "time": f.time, **d.to_dict()})


def write_json(path, data) -> None:
    path = Path(path)
    with _open_for_write(path) as fh:
        json.dump(data, fh, indent=2, allow_nan=False)
        fh.write("\n")


def report_schema() -> dict:
    text = resources.files("seaice_brine").joinpath("report_schema.json").read_text()
    return json.loads(text)


def validate_report(data: dict) -> None:
    jsonschema.validate(data, report_schema())


def write_report(path, report) -> None:
    """RunReport as schema-validated JSON plus a ``.txt`` summary alongside."""
    data = report.to_dict() if hasattr(report, "to_dict") else report
    validate_report(data)
    path = Path(path)
    write_json(path, data)
    if hasattr(report, "summary"):
        path.with_suffix(".txt").write_text(report.summary() + "\n")
