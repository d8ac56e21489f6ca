"""Small helpers shared across modules: TOML loading, seeding, CSV floats."""

from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def load_toml(path: str | Path) -> dict[str, Any]:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def data_path(name: str) -> Path:
    """Path of a file bundled in ``uswb/data``."""
    return Path(str(resources.files("uswb") / "data" / name))


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``.

    Every random draw in the package goes through here, so results depend only
    on the master seed and the key path, never on evaluation order.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def fmt_float(x: float) -> str:
    """Shortest round-tripping decimal form of a float."""
    return repr(float(x))
