"""Versioned array container shared by scenes, datasets, models and plans.

A container is a run of ``.npy`` records written with `numpy.lib.format`:
the first record holds the canonical JSON header as ``uint8`` bytes, e.g.
``{"arrays": [...], "attrs": {...}, "format_version": 1, "kind": "..."}``,
and one record follows per array, in header order. Records use ``.npy``
version 1.0 and little-endian dtypes, so equal content gives equal bytes.
"""

import io
import json
import logging
from pathlib import Path

import numpy as np

from . import errors
from .utils import atomic_write

__all__ = ["FORMAT_VERSION", "write_arrays", "read_arrays"]

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
NPY_VERSION = (1, 0)


def _little_endian(array):
    array = np.ascontiguousarray(array)
    return array.astype(array.dtype.newbyteorder("<"), copy=False)


def write_arrays(path, kind, arrays, attrs=None):
    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "attrs": attrs or {},
        "arrays": list(arrays),
    }
    encoded = json.dumps(header, sort_keys=True).encode()
    with atomic_write(path) as file:
        np.lib.format.write_array(
            file, np.frombuffer(encoded, dtype=np.uint8), NPY_VERSION, allow_pickle=False
        )
        for array in arrays.values():
            np.lib.format.write_array(
                file, _little_endian(np.asarray(array)), NPY_VERSION, allow_pickle=False
            )
    logger.debug("Wrote %s file: %s", kind, Path(path).as_posix())


def read_arrays(path, kind):
    """Return `(arrays, attrs)` from a container written by `write_arrays`."""
    name = Path(path).as_posix()
    buffer = io.BytesIO(Path(path).read_bytes())
    try:
        record = np.lib.format.read_array(buffer, allow_pickle=False)
        header = json.loads(record.tobytes())
    except ValueError as exc:
        raise errors.FormatError(f"Not a beamsweep file: {name}: {exc}") from exc
    if not isinstance(header, dict):
        raise errors.FormatError(f"Malformed header: {name}")
    if header.get("format_version") != FORMAT_VERSION:
        raise errors.VersionMismatchError(
            f"Unsupported format version {header.get('format_version')!r}, "
            f"expected {FORMAT_VERSION}"
        )
    if header.get("kind") != kind:
        raise errors.FormatError(
            f"Expected a {kind!r} file, found {header.get('kind')!r}"
        )
    arrays = {}
    for array_name in header["arrays"]:
        try:
            arrays[array_name] = np.lib.format.read_array(buffer, allow_pickle=False)
        except ValueError as exc:
            raise errors.TruncatedFileError(
                f"Array {array_name!r} is incomplete in {name}: {exc}"
            ) from exc
    if buffer.read(1):
        raise errors.FormatError(f"Trailing data after the last array: {name}")
    return arrays, header["attrs"]
