"""TOML loading and the layered run configuration (defaults < file < env < flags)."""

from __future__ import annotations

import copy
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

CONFIG_ENV = "AEROPIPE_CONFIG"
DATA_DIR_ENV = "AEROPIPE_DATA_DIR"


def load_toml(path: str | os.PathLike) -> dict[str, Any]:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def load_packaged_toml(name: str) -> dict[str, Any]:
    text = resources.files("aeropipe").joinpath("data", name).read_text(encoding="utf-8")
    return tomllib.loads(text)


def packaged_path(name: str) -> Path:
    return Path(str(resources.files("aeropipe").joinpath("data", name)))


DEFAULTS: dict[str, Any] = {
    "simulate": {
        "url": "",
        "api_key": "",
        "duration": 10.0,
    },
    "serve": {
        "host": "127.0.0.1",
        "port": 8080,
        "data_dir": "./aeropipe-data",
        "min_update_interval": 1.0,
        "channels": [],
    },
    "analyze": {
        "dataset": "city_day.csv",
        "task": "regression",
        "models": [],
        "smote": [False, True],
        "test_fraction": 0.2,
        "seed": 42,
        "out_dir": "reports",
    },
    "insights": {
        "dataset": "city_day.csv",
        "out_dir": "insights",
        "cities": [],
        "top_n": 9,
        "max_by": "yearly-mean",
    },
}


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    out = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_config(
    path: str | os.PathLike | None = None,
    flags: Mapping[str, Mapping[str, Any]] | None = None,
    environ: Mapping[str, str] | None = None,
) -> dict[str, Any]:
    """Merge built-in defaults, the config file, environment and CLI flags.

    ``flags`` holds only the options the user actually passed; ``None`` values
    are ignored so unset flags never mask the file.
    """
    environ = os.environ if environ is None else environ
    config = copy.deepcopy(DEFAULTS)
    path = path or environ.get(CONFIG_ENV)
    if path:
        config = deep_merge(config, load_toml(path))
    if environ.get(DATA_DIR_ENV):
        config["serve"]["data_dir"] = environ[DATA_DIR_ENV]
    for section, values in (flags or {}).items():
        config.setdefault(section, {})
        for key, value in values.items():
            if value is not None:
                config[section][key] = value
    return config


def dump_toml(config: Mapping[str, Any]) -> str:
    """Render a config mapping back to TOML (tables of scalars / lists / arrays of tables)."""
    lines: list[str] = []

    def scalar(v: Any) -> str:
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, float)):
            return repr(v)
        if isinstance(v, str):
            return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
        if isinstance(v, (list, tuple)):
            return "[" + ", ".join(scalar(x) for x in v) + "]"
        raise TypeError(f"cannot render {type(v).__name__} as TOML")

    def table(prefix: str, mapping: Mapping[str, Any]) -> None:
        plain = {k: v for k, v in mapping.items() if not _is_table(v) and not _is_table_array(v)}
        lines.append(f"[{prefix}]")
        for k, v in plain.items():
            lines.append(f"{k} = {scalar(v)}")
        lines.append("")
        for k, v in mapping.items():
            if _is_table(v):
                table(f"{prefix}.{k}", v)
            elif _is_table_array(v):
                for item in v:
                    lines.append(f"[[{prefix}.{k}]]")
                    for ik, iv in item.items():
                        lines.append(f"{ik} = {scalar(iv)}")
                    lines.append("")

    for section, body in config.items():
        table(section, body)
    return "\n".join(lines)


def _is_table(v: Any) -> bool:
    return isinstance(v, Mapping)


def _is_table_array(v: Any) -> bool:
    return isinstance(v, list) and bool(v) and all(isinstance(x, Mapping) for x in v)
