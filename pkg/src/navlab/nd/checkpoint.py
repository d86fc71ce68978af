"""Single-file checkpoint format.

Layout: one line of UTF-8 JSON (format tag, config hash, tensor names and
shapes, free-form metadata) terminated by a newline, followed by the raw
little-endian float32 buffers concatenated in header order.
"""

import json

import numpy as np

from ..errors import ConfigurationError

FORMAT = "navlab-checkpoint-v1"


def save_checkpoint(path, tensors, meta=None, config_hash=""):
    """Write named float32 arrays plus JSON metadata to a single file."""
    entries = []
    blobs = []
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape)})
        blobs.append(arr.tobytes())
    header = {
        "format": FORMAT,
        "config_hash": config_hash,
        "tensors": entries,
        "meta": meta or {},
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        f.write(b"\n")
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path):
    """Read a checkpoint; returns (tensors dict, meta dict, config_hash)."""
    with open(path, "rb") as f:
        header_line = f.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"{path}: not a checkpoint file ({exc})")
        if header.get("format") != FORMAT:
            raise ConfigurationError(f"{path}: unknown checkpoint format {header.get('format')!r}")
        tensors = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = f.read(count * 4)
            if len(buf) != count * 4:
                raise ConfigurationError(f"{path}: truncated buffer for {entry['name']!r}")
            tensors[entry["name"]] = np.frombuffer(buf, dtype="<f4").reshape(shape).copy()
        if f.read(1):
            raise ConfigurationError(f"{path}: trailing bytes after declared buffers")
    return tensors, header.get("meta", {}), header.get("config_hash", "")
