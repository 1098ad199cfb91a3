"""Checkpoint container: named parameter arrays plus a JSON header.

The on-disk format is an uncompressed ``.npz`` archive.  Each network
parameter is stored under ``<network>/<param>`` as its row-major array
(name, shape, and values all round-trip bit-exactly); the ``__header__``
entry carries a JSON document with the format version, the per-network
architecture metadata, and the entropy temperature.
"""

from __future__ import annotations

import io
import json
from typing import Dict, Tuple

import numpy as np

FORMAT_VERSION = 1


def save_checkpoint(path: str, networks: Dict[str, Dict[str, np.ndarray]], header: Dict):
    """Write named parameter groups and a metadata header.

    networks maps a network name (e.g. "actor") to its name -> array dict;
    header must be JSON-serializable and gets the format version injected.
    """
    payload = {}
    for net_name, params in networks.items():
        for param_name, arr in params.items():
            payload[f"{net_name}/{param_name}"] = np.asarray(arr)
    doc = dict(header)
    doc["format_version"] = FORMAT_VERSION
    payload["__header__"] = np.frombuffer(
        json.dumps(doc, sort_keys=True).encode("utf-8"), dtype=np.uint8
    )
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path: str) -> Tuple[Dict[str, Dict[str, np.ndarray]], Dict]:
    with np.load(path) as archive:
        header = json.loads(bytes(archive["__header__"]).decode("utf-8"))
        if header.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version: {header.get('format_version')}")
        networks: Dict[str, Dict[str, np.ndarray]] = {}
        for key in archive.files:
            if key == "__header__":
                continue
            net_name, param_name = key.split("/", 1)
            networks.setdefault(net_name, {})[param_name] = archive[key]
    return networks, header


def checkpoint_bytes(networks: Dict[str, Dict[str, np.ndarray]], header: Dict) -> bytes:
    buf = io.BytesIO()
    payload = {}
    for net_name, params in networks.items():
        for param_name, arr in params.items():
            payload[f"{net_name}/{param_name}"] = np.asarray(arr)
    doc = dict(header)
    doc["format_version"] = FORMAT_VERSION
    payload["__header__"] = np.frombuffer(
        json.dumps(doc, sort_keys=True).encode("utf-8"), dtype=np.uint8
    )
    np.savez(buf, **payload)
    return buf.getvalue()
