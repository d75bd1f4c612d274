"""Saved-model container.

A model file is an uncompressed numpy ``.npz`` archive. Each parameter
array is stored under its field name (``W_in``, ``U1``, ``W_r`` ...) and one
extra entry, ``__meta__``, holds a UTF-8 JSON document::

    {"format": "pnormgates-model", "version": 1,
     "kind": "highway" | "gru",
     "p": ..., "epsilon": ..., "layers": ..., "activation": ...,
     "config": {...TrainConfig...},
     "vocabulary": [...] | null,
     "standardization": {"mean": [...], "std": [...]} | null}

Readers reject unknown formats and versions newer than their own.
"""
from __future__ import annotations

import json

import numpy as np

from .gates import PNorm
from .gru import GruParams
from .highway import HighwayParams

FORMAT = "pnormgates-model"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def save_model(path, params, config=None, vocabulary=None, mean=None, std=None) -> None:
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "kind": "highway" if isinstance(params, HighwayParams) else "gru",
        "p": params.pn.p,
        "epsilon": params.pn.epsilon,
        "config": config.to_dict() if config is not None else None,
        "vocabulary": list(vocabulary) if vocabulary is not None else None,
        "standardization": None if mean is None else {
            "mean": np.asarray(mean).tolist(), "std": np.asarray(std).tolist()},
    }
    if isinstance(params, HighwayParams):
        meta["layers"] = params.layers
        meta["activation"] = params.activation
    blob = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=blob, **params.arrays())


def load_model(path):
    """Return ``(params, meta)``."""
    try:
        with np.load(path, allow_pickle=False) as z:
            arrays = {k: z[k] for k in z.files}
    except (OSError, ValueError) as exc:
        raise ModelFormatError(f"{path}: not a model file ({exc})") from None
    if "__meta__" not in arrays:
        raise ModelFormatError(f"{path}: missing metadata")
    meta = json.loads(arrays.pop("__meta__").tobytes().decode("utf-8"))
    if meta.get("format") != FORMAT:
        raise ModelFormatError(f"{path}: unknown format {meta.get('format')!r}")
    if meta.get("version", 0) > VERSION:
        raise ModelFormatError(f"{path}: format version {meta['version']} is newer than {VERSION}")
    pn = PNorm(meta["p"], meta["epsilon"])
    arrays = {k: v.astype(np.float64) for k, v in arrays.items()}
    if meta["kind"] == "highway":
        params = HighwayParams(**arrays, layers=meta["layers"], pn=pn,
                               activation=meta["activation"])
    elif meta["kind"] == "gru":
        params = GruParams(**arrays, pn=pn)
    else:
        raise ModelFormatError(f"{path}: unknown model kind {meta['kind']!r}")
    return params, meta
