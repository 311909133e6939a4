"""
Path utility functions for bundled configs and run output directories.
"""

import logging
import os

logger = logging.getLogger(__name__)

# Define project root relative to this file's location (utils/paths.py -> root)
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
BUNDLED_CONFIG_ROOT = os.path.join(PROJECT_ROOT, 'configs')

TRAJECTORIES_FILE = 'trajectories.csv'
DIAGNOSTICS_FILE = 'diagnostics.csv'
SUMMARY_FILE = 'summary.json'
RUN_CONFIG_FILE = 'run_config.json'


def bundled_config_names():
    """Names of the configs shipped in configs/ (without extension)."""
    if not os.path.isdir(BUNDLED_CONFIG_ROOT):
        return []
    return sorted(f[:-4] for f in os.listdir(BUNDLED_CONFIG_ROOT) if f.endswith('.ini'))


def resolve_config_path(name_or_path: str) -> str:
    """
    Resolve a config argument to a file path.

    Existing paths are returned unchanged; otherwise the argument is looked up
    among the bundled configs, with or without the .ini extension.
    """
    if os.path.isfile(name_or_path):
        return name_or_path
    stem = name_or_path[:-4] if name_or_path.endswith('.ini') else name_or_path
    bundled = os.path.join(BUNDLED_CONFIG_ROOT, f"{stem}.ini")
    if os.path.isfile(bundled):
        return bundled
    raise FileNotFoundError(
        f"Config not found: {name_or_path} (bundled configs: {', '.join(bundled_config_names())})"
    )


def ensure_output_directory(directory: str) -> str:
    """
    Create the run output directory if needed.

    Returns:
        The absolute path of the directory
    """
    path = os.path.abspath(directory)
    os.makedirs(path, exist_ok=True)
    logger.info(f"Output directory created/verified: {path}")
    return path


def fields_filename(step: int) -> str:
    """File name for the fitted fields of one snapshot, e.g. 'fields_380.csv'."""
    return f"fields_{step}.csv"
