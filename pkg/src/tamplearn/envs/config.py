"""Key-value config files for domain constants and experiment presets.

Format: one ``key = value`` pair per line, ``#`` comments, blank lines
ignored. Values are parsed as int, then float, then whitespace-separated
float vectors, falling back to bare strings. Sections are flat; dotted keys
(``cover.n_blocks``) are the namespacing convention.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Union

from ..errors import FileFormatError

ConfigValue = Union[int, float, str, tuple[float, ...]]
Config = dict[str, ConfigValue]


def _parse_value(text: str) -> ConfigValue:
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    parts = text.split()
    if len(parts) > 1:
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            pass
    return text


def parse_config(text: str) -> Config:
    out: Config = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FileFormatError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise FileFormatError(f"line {lineno}: empty key")
        out[key] = _parse_value(value)
    return out


def load_config(path: str | Path) -> Config:
    return parse_config(Path(path).read_text())


def load_domain_defaults(domain: str) -> Config:
    """Defaults shipped with the package (``configs/<domain>.cfg``)."""
    from importlib.resources import files

    text = files("tamplearn").joinpath("configs", f"{domain}.cfg").read_text()
    return parse_config(text)


def extract_prefixed(config: Mapping[str, ConfigValue], prefix: str) -> Config:
    """Sub-config of keys starting with ``prefix``, with the prefix stripped."""
    return {
        key[len(prefix):]: value
        for key, value in config.items()
        if key.startswith(prefix)
    }


def format_config(config: Mapping[str, ConfigValue]) -> str:
    lines = []
    for key in sorted(config):
        value = config[key]
        if isinstance(value, tuple):
            text = " ".join(repr(float(v)) for v in value)
        else:
            text = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
