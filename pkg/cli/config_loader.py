"""
Config Loader Module

Reads run configuration files: INI sections parsed with configparser, then
validated as a RunConfig. Unknown sections and keys are rejected. Every
failure is raised as ConfigError with the offending line and/or
section.field name. docs/config_format.md describes the format.
"""

import configparser
import logging
from typing import Dict, List, Optional, Tuple

from pydantic import ValidationError

from models.config import RunConfig
from models.errors import ConfigError
from models.fitting import round_half_away
from utils.paths import resolve_config_path

logger = logging.getLogger(__name__)

PACKET_PREFIX = "packet."
FIT_SECTIONS = ("amplitude_fit", "phase_fit")
MODEL_SECTIONS = ("grid", "potential", "output") + FIT_SECTIONS

# Keys of these sections sit at the top level of RunConfig.
FLAT_SECTIONS = {
    "run": ("name",),
    "step": ("dt", "num_steps", "node_floor"),
}
LIST_KEYS = {("output", "field_times"), ("potential", "xs"), ("potential", "values")}

DEFAULT_GRID_COUNT = 51

LineIndex = Dict[Tuple[str, Optional[str]], int]


def _index_lines(text: str) -> LineIndex:
    """Map (section, key) and (section, None) to 1-based line numbers."""
    index: LineIndex = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            index.setdefault((section, None), lineno)
        elif section is not None:
            for sep in ("=", ":"):
                if sep in line:
                    key = line.split(sep, 1)[0].strip().lower()
                    index.setdefault((section, key), lineno)
                    break
    return index


def _parse_error_line(e: configparser.Error) -> Optional[int]:
    if getattr(e, "lineno", None) is not None:
        return e.lineno
    errors = getattr(e, "errors", None)
    if errors:
        return errors[0][0]
    return None


def _split_list(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _packet(name: str, options: Dict[str, str], lines: LineIndex) -> dict:
    packet: dict = dict(options)
    if "weight" in packet:
        try:
            packet["weight"] = complex(packet["weight"].replace(" ", ""))
        except ValueError:
            raise ConfigError(
                f"{name}.weight: not a complex number: {options['weight']!r}",
                line=lines.get((name, "weight")),
                field=f"{name}.weight",
            )
    return packet


def _fit_policy(options: Dict[str, str], grid_count: int) -> dict:
    policy: dict = dict(options)
    if policy.get("boundary_extension", "").lower() == "auto":
        policy["boundary_extension"] = round_half_away(grid_count / 7)
    return policy


def _potential(options: Dict[str, str]) -> dict:
    potential: dict = dict(options)
    xs = potential.pop("xs", None)
    values = potential.pop("values", None)
    if xs is not None or values is not None:
        potential["table"] = (xs or [], values or [])
    return potential


def _grid_count(sections: Dict[str, Dict[str, str]]) -> int:
    raw = sections.get("grid", {}).get("count")
    try:
        return int(raw) if raw is not None else DEFAULT_GRID_COUNT
    except ValueError:
        # Left for GridSpec validation to report.
        return DEFAULT_GRID_COUNT


def _assemble(sections: Dict[str, Dict[str, str]], lines: LineIndex) -> Tuple[dict, List[str]]:
    """Build the RunConfig input dict; also returns the packet section names in order."""
    data: dict = {}
    packet_names: List[str] = []
    grid_count = _grid_count(sections)

    for name, options in sections.items():
        if name.startswith(PACKET_PREFIX):
            packet_names.append(name)
        elif name in FLAT_SECTIONS:
            for key, value in options.items():
                if key not in FLAT_SECTIONS[name]:
                    raise ConfigError(
                        f"{name}.{key}: unknown key",
                        line=lines.get((name, key)),
                        field=f"{name}.{key}",
                    )
                data[key] = value
        elif name in FIT_SECTIONS:
            data[name] = _fit_policy(options, grid_count)
        elif name == "potential":
            data[name] = _potential(options)
        elif name in MODEL_SECTIONS:
            data[name] = dict(options)
        else:
            raise ConfigError(f"unknown section [{name}]", line=lines.get((name, None)), field=name)

    if packet_names:
        data["initial_state"] = {
            "packets": [_packet(name, sections[name], lines) for name in packet_names]
        }
    return data, packet_names


def _field_name(loc: tuple, packet_names: List[str]) -> Tuple[str, Optional[str]]:
    """Translate a pydantic error location into (section, key)."""
    head = loc[0] if loc else ""
    if head == "initial_state":
        if len(loc) >= 3 and isinstance(loc[2], int) and loc[2] < len(packet_names):
            key = str(loc[3]) if len(loc) > 3 else None
            return packet_names[loc[2]], key
        return "packet", None
    for section, keys in FLAT_SECTIONS.items():
        if head in keys:
            return section, head
    if head == "potential" and len(loc) > 1 and loc[1] == "table":
        return "potential", "xs"
    key = str(loc[1]) if len(loc) > 1 else None
    return str(head), key


def _validation_error(e: ValidationError, packet_names: List[str], lines: LineIndex) -> ConfigError:
    first = e.errors()[0]
    section, key = _field_name(tuple(first["loc"]), packet_names)
    field = f"{section}.{key}" if key else section
    line = lines.get((section, key)) or lines.get((section, None))
    location = f" (line {line})" if line else ""
    return ConfigError(f"{field}: {first['msg']}{location}", line=line, field=field)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """
    Parse and validate configuration text.

    Raises:
        ConfigError: on syntax errors (with line) or invalid values (with field)
    """
    lines = _index_lines(text)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        line = _parse_error_line(e)
        raise ConfigError(f"{source}: cannot parse config (line {line}): {e.message}", line=line)
    if parser.defaults():
        raise ConfigError("the [DEFAULT] section is not supported", line=lines.get(("DEFAULT", None)), field="DEFAULT")

    sections: Dict[str, Dict[str, str]] = {}
    for name in parser.sections():
        options = {}
        for key, value in parser.items(name):
            options[key] = _split_list(value) if (name, key) in LIST_KEYS else value
        sections[name] = options

    data, packet_names = _assemble(sections, lines)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise _validation_error(e, packet_names, lines) from e


def load_config(path: str) -> RunConfig:
    """
    Load a run configuration from a file path or bundled config name.

    Args:
        path: File path, or the name of a config shipped in configs/

    Returns:
        The validated RunConfig

    Raises:
        FileNotFoundError: if neither a file nor a bundled config matches
        ConfigError: on parse or validation errors
    """
    resolved = resolve_config_path(path)
    with open(resolved) as f:
        text = f.read()
    cfg = parse_config(text, source=resolved)
    logger.info(f"Loaded config '{cfg.name}' from {resolved}")
    return cfg
