"""Small helpers shared by the pipeline and the commands"""
from __future__ import annotations

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Optional

import numpy as np

logger = logging.getLogger(__name__)

# Purposes used as the third key of derive_rng, keep values stable
PURPOSE_SPLIT = 0
PURPOSE_INIT = 1
PURPOSE_SHUFFLE = 2
PURPOSE_INFERENCE = 3
PURPOSE_NOISE = 4


def derive_seed(master_seed: int, *keys: int) -> int:
    """
    Splitting rule for sub-streams: SeedSequence([master_seed, *keys]).

    The same (master_seed, keys) always yields the same 64-bit seed, and
    distinct keys yield statistically independent streams.
    """
    sequence = np.random.SeedSequence([int(master_seed), *(int(key) for key in keys)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def derive_rng(master_seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *keys))


def atomic_write_bytes(path: Path | str, payload: bytes) -> Path:
    """
    Write payload next to path and rename it into place, so readers never see a partial file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as file:
            file.write(payload)
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise
    logger.debug("Wrote %s (%s bytes)", path, len(payload))
    return path


def atomic_write_text(path: Path | str, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(data: Any) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline"""
    return json.dumps(data, sort_keys=True, indent=2, allow_nan=False) + "\n"


def atomic_write_json(path: Path | str, data: Any) -> Path:
    return atomic_write_text(path, dump_json(data))


def format_mean_std(mean: Optional[float], std: Optional[float], scale: float = 100.0) -> str:
    """
    Format like the result tables: ``73.05 ± 2.22``, missing cells as ``-``
    """
    if mean is None:
        return "-"
    return f"{mean * scale:.2f} ± {(std or 0.0) * scale:.2f}"
