"""Run configuration: flat ``key = value`` files, presets and resolution to a SystemSpec."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .dynamics import auto_cutoff
from .errors import ConfigError
from .statespace import DetectorKind, SystemSpec, Tolerances

MODES = ("simulate", "analytic-ho", "empty-cavity", "spectral", "compare", "preset")
PRESETS = {
    # figure id: (detector kind, default levels)
    "fig1": (DetectorKind.LADDER, 3),
    "fig2": (DetectorKind.TWO_LEVEL_ENSEMBLE, 3),
    "fig3a": (DetectorKind.LADDER, 12),
    "fig3b": (DetectorKind.TWO_LEVEL_ENSEMBLE, 12),
}
PRESET_G = 1e-2
PRESET_EPSILON = 1e-3
PRESET_EPS_T = 3.0
OUTPUT_DIR_ENV = "DCE_OUTPUT_DIR"
DEFAULT_K_REPORT = 30


@dataclass
class RunConfig:
    mode: str = "simulate"
    kind: str = "ladder"
    levels: int = 3
    g: float = 1e-2
    epsilon: float = 1e-3
    fock_cutoff: Optional[int] = None  # None selects the cutoff automatically
    t_final: Optional[float] = None
    eps_t: Optional[float] = None
    rel_tol: float = Tolerances.rel_tol
    abs_tol: float = Tolerances.abs_tol
    tail_threshold: float = Tolerances.tail_threshold
    samples: int = 600
    k_report: Optional[int] = None
    full_distribution: bool = False
    method: str = "dop853"
    max_doublings: int = 3
    max_excitation: int = 20
    preset: Optional[str] = None
    output: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        self.kind = DetectorKind.parse(self.kind).value
        if self.preset is not None and self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; expected one of {sorted(PRESETS)}")
        if self.mode == "preset" and self.preset is None:
            raise ConfigError("preset mode needs a preset id")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.fock_cutoff is not None and self.fock_cutoff < 2:
            raise ConfigError("fock_cutoff must be >= 2")
        if self.k_report is not None and self.k_report < 0:
            raise ConfigError("k_report must be >= 0")
        if self.max_doublings < 0:
            raise ConfigError("max_doublings must be >= 0")

    @property
    def auto_cutoff(self) -> bool:
        return self.fock_cutoff is None

    def resolved_t_final(self) -> float:
        if self.eps_t is not None:
            if self.epsilon == 0:
                raise ConfigError("eps_t needs a nonzero epsilon; give t_final instead")
            return self.eps_t / abs(self.epsilon)
        if self.t_final is not None:
            return self.t_final
        return PRESET_EPS_T / abs(self.epsilon) if self.epsilon else 0.0

    def apply_preset(self) -> "RunConfig":
        """Copy with the preset figure parameters filled in."""
        if self.preset is None:
            return self
        kind, default_levels = PRESETS[self.preset]
        levels = self.levels if self.preset in ("fig1", "fig2") else default_levels
        return dataclasses.replace(
            self,
            kind=kind.value,
            levels=levels,
            g=PRESET_G,
            epsilon=PRESET_EPSILON,
            eps_t=PRESET_EPS_T if self.eps_t is None and self.t_final is None else self.eps_t,
        )

    def to_spec(self) -> SystemSpec:
        tols = Tolerances(self.rel_tol, self.abs_tol, self.tail_threshold)
        spec = SystemSpec(
            detector_kind=self.kind,
            levels=self.levels,
            g=self.g,
            epsilon=self.epsilon,
            fock_cutoff=self.fock_cutoff or 16,
            t_final=self.resolved_t_final(),
            tolerances=tols,
        )
        if self.auto_cutoff:
            spec = dataclasses.replace(spec, fock_cutoff=auto_cutoff(spec))
        return spec

    def to_text(self) -> str:
        """Serialise as ``key = value`` lines that ``parse_config_text`` reads back."""
        lines = ["# effective run configuration"]
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, float):
                value = repr(value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    def output_path(self, default_name: str) -> Path:
        if self.output:
            return Path(self.output)
        return Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / default_name


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_ALIASES = {"detector_kind": "kind", "n": "levels", "k_max": "fock_cutoff", "sample_count": "samples",
            "preset_id": "preset"}


def _coerce(key: str, raw: str):
    text = raw.strip()
    kind = str(_FIELD_TYPES[key])
    if text.lower() in ("", "none", "auto") and "Optional" in kind:
        return None
    try:
        if "bool" in kind:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if "int" in kind:
            return int(text)
        if "float" in kind:
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return text


def normalize_key(key: str) -> str:
    key = key.strip().lower().replace("-", "_")
    key = _ALIASES.get(key, key)
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown configuration key {key!r}")
    return key


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = line.split("=", 1)
        key = normalize_key(key)
        values[key] = _coerce(key, raw)
    return values


def load_config_file(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return parse_config_text(text)


def build_config(file_values: Optional[dict] = None, **overrides) -> RunConfig:
    """Merge defaults, file values and explicit overrides (``None`` means unset)."""
    merged = dict(file_values or {})
    for key, value in overrides.items():
        if value is None:
            continue
        key = normalize_key(key)
        merged[key] = _coerce(key, value) if isinstance(value, str) else value
    return RunConfig(**merged)
