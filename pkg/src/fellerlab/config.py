"""Plain-text ``key = value`` configuration.

A key applies to every experiment that has it; ``name.key`` applies to one
experiment only.  ``seed`` is global.  Values are coerced to the type of the
default they override.
"""
from __future__ import annotations

import json
from pathlib import Path

from .errors import SpecValidationError
from .experiments import CATALOG

DEFAULT_SEED = 1


def parse_text(text: str) -> dict[str, str]:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecValidationError(f"line {n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise SpecValidationError(f"line {n}: empty key")
        out[k] = v
    return out


def load_file(path) -> dict[str, str]:
    """Read a key = value file, or the config echo of a JSON report."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        rep = json.loads(text)
        name = rep["experiment"]
        out = {f"{name}.{k}": str(v) for k, v in rep["config"].items()}
        out["seed"] = str(rep["seed"])
        return out
    return parse_text(text)


def _coerce(default, raw, key):
    if not isinstance(raw, str):
        return raw
    try:
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false", "1", "0"):
                raise ValueError
            return raw.lower() in ("true", "1")
        if isinstance(default, int):
            return int(float(raw)) if float(raw).is_integer() else int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise SpecValidationError(f"{key}: cannot read {raw!r} as {type(default).__name__}") from None
    return raw


def resolve(names, overrides: dict[str, str]) -> tuple[int, dict[str, dict]]:
    """Merge defaults with overrides for the given experiments; validates every key first."""
    overrides = dict(overrides)
    seed = overrides.pop("seed", DEFAULT_SEED)
    try:
        seed = int(seed)
    except ValueError:
        raise SpecValidationError(f"seed must be an integer, got {seed!r}") from None
    if not 0 <= seed < 2 ** 64:
        raise SpecValidationError("seed must fit in 64 bits")
    known_global = set()
    for spec in CATALOG.values():
        known_global.update(spec.defaults)
    for k in overrides:
        if "." in k:
            name, key = k.split(".", 1)
            if name not in CATALOG:
                raise SpecValidationError(f"unknown experiment in key {k!r}")
            if key not in CATALOG[name].defaults:
                raise SpecValidationError(f"{name} has no parameter {key!r}")
        elif k not in known_global:
            raise SpecValidationError(f"unknown parameter {k!r}")
    params = {}
    for name in names:
        spec = CATALOG[name]
        p = dict(spec.defaults)
        for key, default in spec.defaults.items():
            for k in (key, f"{name}.{key}"):
                if k in overrides:
                    p[key] = _coerce(default, overrides[k], k)
        params[name] = p
    return seed, params


def defaults_text() -> str:
    lines = [f"seed = {DEFAULT_SEED}"]
    for name, spec in CATALOG.items():
        lines.append("")
        lines.append(f"# {name}: {spec.ref}")
        for k, v in spec.defaults.items():
            lines.append(f"{name}.{k} = {v!r}" if isinstance(v, float) else f"{name}.{k} = {v}")
    return "\n".join(lines) + "\n"
