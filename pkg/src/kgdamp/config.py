"""Experiment configuration: a TOML document with dotted sections.

Sections are ``model``, ``dynamics``, ``initial``, ``sweep``, ``gap`` and
``output``, plus the top-level keys ``command`` and ``seed``. Unknown keys
are rejected and every constraint violation is reported, not only the
first.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .nonlinearity import NonlinearitySpec

__all__ = [
    "COMMANDS",
    "ConfigError",
    "ModelConfig",
    "DynamicsConfig",
    "InitialConfig",
    "SweepConfig",
    "GapConfig",
    "OutputConfig",
    "ExperimentConfig",
    "parse_config",
    "load_config",
]

COMMANDS = ("stationary", "spectrum", "evolve", "classify", "sweep", "gapcheck")
INITIAL_KINDS = ("profile", "gaussian", "zero")


class ConfigError(ValueError):
    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class ModelConfig:
    d: int = 1
    R: float = 30.0
    N: int = 1024
    theta: Optional[float] = None
    attract: Optional[tuple] = None
    repel: tuple = ()
    gamma: Optional[float] = None
    nodes: int = 0

    def nonlinearity(self) -> NonlinearitySpec:
        if self.attract is not None:
            attract = self.attract
        else:
            attract = ((1.0, self.theta),)
        gamma = self.gamma
        if gamma is None:
            gamma = (max(p for _, p in attract) - 1.0) / 2.0
        return NonlinearitySpec(attract=attract, repel=self.repel, gamma=gamma)


@dataclass(frozen=True)
class DynamicsConfig:
    alpha: Optional[float] = None
    dt: float = 0.01
    T: float = 20.0
    blowup_norm_cap: float = 1e6
    delta: Optional[float] = None
    conv_tol: float = 1e-4
    window_fraction: float = 0.1


@dataclass(frozen=True)
class InitialConfig:
    kind: str = "profile"
    amplitude: float = 1.0
    width: float = 1.0
    velocity: float = 0.0


@dataclass(frozen=True)
class SweepConfig:
    amplitudes: tuple = ()
    noise: float = 0.0


@dataclass(frozen=True)
class GapConfig:
    C1: Optional[float] = None
    C2: Optional[float] = None
    beta1: Optional[float] = None
    beta2: Optional[float] = None
    lipR: Optional[float] = None


@dataclass(frozen=True)
class OutputConfig:
    record_every: int = 10
    csv: bool = True
    ndjson: bool = True
    report: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    gap: GapConfig = field(default_factory=GapConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def sweep_jobs(self) -> list[dict]:
        """One classify job per amplitude ``c`` on ``c * Q``."""
        return [{"index": i, "amplitude": float(c)} for i, c in enumerate(self.sweep.amplitudes)]


_SECTIONS = {
    "model": ModelConfig,
    "dynamics": DynamicsConfig,
    "initial": InitialConfig,
    "sweep": SweepConfig,
    "gap": GapConfig,
    "output": OutputConfig,
}

_INT_KEYS = {"model.d", "model.N", "model.nodes", "output.record_every", "seed"}
_BOOL_KEYS = {"output.csv", "output.ndjson", "output.report"}
_STR_KEYS = {"initial.kind", "command"}
_TERM_KEYS = {"model.attract", "model.repel"}
_LIST_KEYS = {"sweep.amplitudes"}


def _coerce(key: str, value: Any, errors: list):
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            errors.append(f"{key}: expected a boolean, got {value!r}")
        return value
    if key in _STR_KEYS:
        if not isinstance(value, str):
            errors.append(f"{key}: expected a string, got {value!r}")
        return value
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            errors.append(f"{key}: expected an integer, got {value!r}")
        return value
    if key in _TERM_KEYS:
        ok = isinstance(value, list) and all(
            isinstance(t, list) and len(t) == 2 and all(_is_num(x) for x in t) for t in value
        )
        if not ok:
            errors.append(f"{key}: expected a list of [coefficient, exponent] pairs, got {value!r}")
            return ()
        return tuple((float(a), float(p)) for a, p in value)
    if key in _LIST_KEYS:
        if not (isinstance(value, list) and all(_is_num(x) for x in value)):
            errors.append(f"{key}: expected a list of numbers, got {value!r}")
            return ()
        return tuple(float(x) for x in value)
    if not _is_num(value):
        errors.append(f"{key}: expected a number, got {value!r}")
        return value
    return float(value)


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _check(cfg: ExperimentConfig, errors: list) -> None:
    m, dyn, ini, out = cfg.model, cfg.dynamics, cfg.initial, cfg.output
    if cfg.command and cfg.command not in COMMANDS:
        errors.append(f"command: must be one of {', '.join(COMMANDS)}, got {cfg.command!r}")
    if isinstance(m.d, int) and not 1 <= m.d <= 6:
        errors.append(f"model.d: dimension must be in the range 1-6, got {m.d}")
    if isinstance(m.R, float) and not m.R > 0:
        errors.append(f"model.R: must be positive, got {m.R}")
    if isinstance(m.N, int) and m.N < 16:
        errors.append(f"model.N: must be at least 16, got {m.N}")
    if isinstance(m.nodes, int) and m.nodes < 0:
        errors.append(f"model.nodes: must be non-negative, got {m.nodes}")
    needs_model = cfg.command != "gapcheck"
    if needs_model:
        terms_ok = (m.theta is None) != (m.attract is None)
        if m.theta is None and m.attract is None:
            errors.append("model.theta or model.attract is required")
        if m.theta is not None and m.attract is not None:
            errors.append("model.theta and model.attract are mutually exclusive")
        if terms_ok and (m.theta is None or _is_num(m.theta)):
            try:
                spec = m.nonlinearity()
                if isinstance(m.d, int) and 1 <= m.d <= 6:
                    spec.check_dimension(m.d)
            except (TypeError, ValueError) as exc:
                errors.append(f"model: {exc}")
    if cfg.command in ("spectrum", "evolve", "classify", "sweep"):
        if dyn.alpha is None:
            errors.append("dynamics.alpha is required")
        elif isinstance(dyn.alpha, float) and not dyn.alpha >= 0:
            errors.append(f"dynamics.alpha: must be non-negative, got {dyn.alpha}")
    for key in ("dt", "T", "blowup_norm_cap", "conv_tol"):
        val = getattr(dyn, key)
        if isinstance(val, float) and not val > 0:
            errors.append(f"dynamics.{key}: must be positive, got {val}")
    if dyn.delta is not None and isinstance(dyn.delta, float) and not dyn.delta > 0:
        errors.append(f"dynamics.delta: must be positive, got {dyn.delta}")
    if isinstance(dyn.window_fraction, float) and not 0 < dyn.window_fraction <= 1:
        errors.append(f"dynamics.window_fraction: must lie in (0, 1], got {dyn.window_fraction}")
    if ini.kind not in INITIAL_KINDS:
        errors.append(f"initial.kind: must be one of {', '.join(INITIAL_KINDS)}, got {ini.kind!r}")
    if isinstance(ini.width, float) and not ini.width > 0:
        errors.append(f"initial.width: must be positive, got {ini.width}")
    if isinstance(out.record_every, int) and out.record_every < 1:
        errors.append(f"output.record_every: must be at least 1, got {out.record_every}")
    if cfg.command == "sweep":
        if not cfg.sweep.amplitudes:
            errors.append("sweep.amplitudes: at least one amplitude is required")
        if isinstance(cfg.sweep.noise, float) and cfg.sweep.noise < 0:
            errors.append(f"sweep.noise: must be non-negative, got {cfg.sweep.noise}")
    if cfg.command == "gapcheck":
        g = cfg.gap
        for key in ("C1", "C2", "beta1", "beta2", "lipR"):
            if getattr(g, key) is None:
                errors.append(f"gap.{key} is required")
        if None not in (g.C1, g.C2, g.beta1, g.beta2, g.lipR):
            if not (g.C1 > 0 and g.C2 > 0):
                errors.append("gap.C1 and gap.C2 must be positive")
            if not 0 <= g.beta2 < g.beta1:
                errors.append(f"gap: need 0 <= beta2 < beta1, got beta1={g.beta1}, beta2={g.beta2}")
            if g.lipR < 0:
                errors.append(f"gap.lipR: must be non-negative, got {g.lipR}")


def parse_config(text: str, command: str | None = None) -> ExperimentConfig:
    """Parse and validate a configuration document.

    ``command`` (from the command line) fills or must agree with the
    document's ``command`` key.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from None
    errors: list[str] = []
    top = {}
    sections: dict[str, dict] = {name: {} for name in _SECTIONS}
    for key, value in doc.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                errors.append(f"{key}: expected a section")
                continue
            fields = _SECTIONS[key].__dataclass_fields__
            for sub, sval in value.items():
                dotted = f"{key}.{sub}"
                if sub not in fields:
                    errors.append(f"{dotted}: unknown key")
                    continue
                sections[key][sub] = _coerce(dotted, sval, errors)
        elif key in ("command", "seed"):
            top[key] = _coerce(key, value, errors)
        else:
            errors.append(f"{key}: unknown key")
    doc_command = top.get("command")
    if command is not None and doc_command is not None and command != doc_command:
        errors.append(f"command: document says {doc_command!r} but {command!r} was requested")
    cmd = command if command is not None else doc_command
    if cmd is None:
        errors.append("command: no command given")
        cmd = ""
    cfg = ExperimentConfig(
        command=cmd,
        seed=top.get("seed", 0),
        **{name: cls(**sections[name]) for name, cls in _SECTIONS.items()},
    )
    _check(cfg, errors)
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path: str, command: str | None = None) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, command)
