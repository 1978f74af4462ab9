import contextlib
import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

__all__ = [
    "SNAPSHOT_STREAM",
    "SPLIT_STREAM",
    "FOLD_STREAM",
    "KMEANS_STREAM",
    "NOISE_STREAM",
    "deep_merge",
    "seed_stream",
    "top_k",
    "top_k_rows",
    "canonical_json",
    "sha256_hex",
    "format_float",
    "atomic_write",
]

# Spawn-key prefixes of the independent random streams drawn from a master seed.
SNAPSHOT_STREAM = 0
SPLIT_STREAM = 1
FOLD_STREAM = 2
KMEANS_STREAM = 3
NOISE_STREAM = 4


def deep_merge(base, override):
    """Return `base` updated by `override`, merging nested tables key by key."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def seed_stream(seed, *spawn_key):
    """Return an independent generator for the stream `(seed, *spawn_key)`.

    Stream `(stage, i)` of a master seed is
    `SeedSequence(seed, spawn_key=(stage, i))`, so each stage and each snapshot
    draws from its own reproducible stream no matter how many others were
    generated before it.
    """
    return np.random.default_rng(
        np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in spawn_key))
    )


def top_k(scores, k):
    """Indices of the `k` largest scores, best first, lowest index on ties."""
    scores = np.asarray(scores)
    return np.argsort(-scores, kind="stable")[:k]


def top_k_rows(scores, k):
    """Row-wise `top_k` over a 2-D score array."""
    return np.argsort(-np.asarray(scores), axis=1, kind="stable")[:, :k]


def canonical_json(data):
    return json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)


def sha256_hex(data):
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()


def format_float(value):
    return format(float(value), ".9g")


@contextlib.contextmanager
def atomic_write(path, mode="wb"):
    """Open a temporary sibling of `path` for writing and rename it into place.

    Readers never observe a partially written file; on error the temporary
    file is removed and `path` is left untouched.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    newline = None if "b" in mode else ""
    try:
        with os.fdopen(fd, mode, newline=newline) as file:
            yield file
        os.replace(tmp_name, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp_name)
        raise
