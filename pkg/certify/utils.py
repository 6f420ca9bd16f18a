import hashlib
import json
import math
from pathlib import Path

import numpy as np


def to_jsonable(value):
    """
    Converts numpy containers and scalars into plain JSON types.

    Non-finite floats become None; callers carry the meaning in a flag
    (e.g. ``vacuous`` on bound entries).

    Args:
        value: Any nesting of dicts, lists, tuples, numpy arrays and scalars.

    Returns:
        The same structure built from dict, list, str, int, float, bool and None.
    """
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def canonical_json(payload) -> str:
    """Serializes a payload with sorted keys so reruns are byte-identical."""
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(payload), encoding="utf-8")
    return path


def read_json(path):
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def sha256_hex(*chunks) -> str:
    """Hashes a sequence of bytes / str chunks, length-prefixed to avoid ambiguity."""
    digest = hashlib.sha256()
    for chunk in chunks:
        if isinstance(chunk, str):
            chunk = chunk.encode("utf-8")
        digest.update(len(chunk).to_bytes(8, "little"))
        digest.update(chunk)
    return digest.hexdigest()


def derive_seeds(seed: int, count: int) -> list:
    """
    Derives ``count`` independent 64-bit seeds from a master seed.

    Args:
        seed (int): Master seed.
        count (int): Number of child seeds.

    Returns:
        list[int]: Child seeds, identical for identical (seed, count).
    """
    state = np.random.SeedSequence(int(seed)).generate_state(count, dtype=np.uint64)
    return [int(value) for value in state]
