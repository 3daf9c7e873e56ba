"""Declarative experiment configuration with schema validation."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import jsonschema

from ..errors import ArgumentError, ConfigError
from ..lattice import LatticeSpec
from ..polycrystal import ContrastParams
from ..spectral import Pairing

OUTPUT_KINDS = ("spectral_function", "measure_atoms", "effective_tensor", "fields", "oracle_compare")

# Contrast values of the 2D isotropic experiments.
REF_SIGMA1 = (51.0741, 45.1602)
REF_SIGMA2 = (3.07, 0.0019)

_COMPLEX = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "schema": {"const": 1},
        "d": {"type": "integer", "enum": [2, 3]},
        "L": {"type": "integer", "minimum": 2},
        "Lc": {"type": "integer", "minimum": 1},
        "samples": {"type": "integer", "minimum": 1},
        "bins": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "sigma1": _COMPLEX,
        "sigma2": _COMPLEX,
        "e0_axis": {"type": "integer", "minimum": 1, "maximum": 3},
        "measure": {
            "type": "array",
            "items": {"type": "integer", "minimum": 1, "maximum": 3},
            "minItems": 2,
            "maxItems": 2,
        },
        "pairing": {"enum": [p.value for p in Pairing]},
        "outputs": {
            "type": "array",
            "items": {"enum": list(OUTPUT_KINDS)},
            "uniqueItems": True,
        },
        "out": {"type": "string", "minLength": 1},
        "workers": {"type": "integer", "minimum": 1},
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment. Defaults are a desk-scale 2D isotropic run."""

    d: int = 2
    L: int = 30
    Lc: int = 10
    samples: int = 200
    bins: int = 100
    seed: int = 0
    sigma1: tuple[float, float] = REF_SIGMA1
    sigma2: tuple[float, float] = REF_SIGMA2
    e0_axis: int = 2
    measure: tuple[int, int] = (1, 1)
    pairing: str = Pairing.X1_GAMMA.value
    outputs: tuple[str, ...] = ("spectral_function", "effective_tensor")
    out: str = "polyspec_out"
    workers: int = field(default=1, compare=False)

    def __post_init__(self):
        if self.Lc < 1 or self.L % self.Lc:
            raise ConfigError("Lc", f"crystallite length {self.Lc} must divide L = {self.L}")
        if self.samples < 1:
            raise ConfigError("samples", f"must be >= 1, got {self.samples}")
        try:
            self.lattice
        except ArgumentError as exc:
            raise ConfigError("d", str(exc)) from exc
        if self.e0_axis > self.d:
            raise ConfigError("e0_axis", f"must lie in 1..{self.d}, got {self.e0_axis}")
        for i, v in enumerate(self.measure):
            if v > self.d:
                raise ConfigError(f"measure/{i}", f"must lie in 1..{self.d}, got {v}")
        try:
            self.contrast
        except ArgumentError as exc:
            raise ConfigError("sigma2", str(exc)) from exc

    @property
    def lattice(self) -> LatticeSpec:
        return LatticeSpec(self.d, self.L, self.Lc)

    @property
    def contrast(self) -> ContrastParams:
        return ContrastParams(complex(*self.sigma1), complex(*self.sigma2))

    @property
    def which(self) -> Pairing:
        return Pairing(self.pairing)

    def to_dict(self) -> dict:
        rec = asdict(self)
        rec["sigma1"] = list(self.sigma1)
        rec["sigma2"] = list(self.sigma2)
        rec["measure"] = list(self.measure)
        rec["outputs"] = list(self.outputs)
        rec["schema"] = 1
        return rec

    def content_hash(self) -> str:
        """SHA-256 of the canonical JSON of everything that affects results."""
        rec = self.to_dict()
        for key in ("workers", "out"):
            rec.pop(key)
        blob = json.dumps(rec, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        clean = {k: v for k, v in overrides.items() if v is not None}
        return config_from_dict({**self.to_dict(), **clean})


def _path(error: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in error.absolute_path]
    if error.validator == "additionalProperties":
        extra = sorted(set(error.instance) - set(error.schema.get("properties", {})))
        parts += extra[:1]
    elif error.validator == "required":
        parts.append(str(error.message.split("'")[1]))
    return "/".join(parts) or "<root>"


def config_from_dict(rec: dict) -> ExperimentConfig:
    """Validate against :data:`CONFIG_SCHEMA` and build a config.

    Raises
    ------
    ConfigError
        With ``path`` naming the offending field.
    """
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(rec), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(_path(err), err.message)
    rec = dict(rec)
    rec.pop("schema", None)
    for key in ("sigma1", "sigma2", "measure", "outputs"):
        if key in rec:
            rec[key] = tuple(rec[key])
    return ExperimentConfig(**rec)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            rec = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from exc
    return config_from_dict(rec)


def reference_config(**overrides) -> ExperimentConfig:
    """4 x 4 crystallite 2D layout with Lc scaled down to 10."""
    base = ExperimentConfig(d=2, L=40, Lc=10, samples=1, bins=50)
    return replace(base, **overrides)
