"""
Settings Module
Features:
- Load config/config.json once for every module
- safe_get helper for nested lookups
- Logging setup shared by the CLI and the verification suite
"""

import json
import logging
from pathlib import Path
from typing import Any

# --------------------------- Load config ---------------------------

CONFIG_PATH = Path(__file__).parent.parent / "config/config.json"

if not CONFIG_PATH.exists():
    raise FileNotFoundError(f"config.json not found at {CONFIG_PATH}")

with CONFIG_PATH.open("r") as f:
    CONFIG = json.load(f)


# --------------------------- Helpers ---------------------------

def safe_get(d: dict, *path, default=None) -> Any:
    """Safe nested dict get."""
    for p in path:
        if d is None or p not in d:
            return default
        d = d[p]
    return d


def setup_logging(level: str = None):
    """Configure root logging from CONFIG["logging"]."""
    level = level or safe_get(CONFIG, "logging", "level", default="INFO")
    fmt = safe_get(CONFIG, "logging", "format",
                   default="%(asctime)s - %(levelname)s - %(message)s")
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO), format=fmt)
