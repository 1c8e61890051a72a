"""Reading and writing JSON/CSV artifacts with provenance envelopes."""
from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

from .errors import ConfigurationError, GraphFormatError, InputError

FORMAT_VERSION = 1


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(doc):
    """Canonical JSON text: sorted keys, fixed separators, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=1, default=_default, allow_nan=True) + "\n"


def sha256_text(text):
    return hashlib.sha256(text.encode()).hexdigest()


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def read_text(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def write_atomic(path, text):
    """Write ``text`` to a temporary file in the target directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def input_ref(path, text=None):
    """``{"path", "sha256"}`` for an input file (hash of its exact bytes)."""
    digest = sha256_text(text) if text is not None else sha256_file(path)
    return {"path": os.fspath(path), "sha256": digest}


def envelope(kind, config, inputs, body):
    return {"kind": kind, "format": FORMAT_VERSION, "config": config, "inputs": inputs, **body}


def load_report(path, kind):
    text = read_text(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{path}: malformed JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, dict) or doc.get("kind") != kind:
        raise ConfigurationError(f"{path} is not a {kind} artifact")
    return doc, text


def resolve_input(doc, name, base_path):
    """Path of an upstream artifact recorded in ``doc``; relative paths are tried
    against the current directory first and then next to ``base_path``."""
    try:
        ref = doc["inputs"][name]
    except (KeyError, TypeError):
        raise ConfigurationError(f"artifact does not reference a {name} input") from None
    path = ref["path"]
    if not os.path.isabs(path) and not os.path.exists(path):
        alt = os.path.join(os.path.dirname(os.path.abspath(base_path)), os.path.basename(path))
        if os.path.exists(alt):
            path = alt
    text = read_text(path)
    if sha256_text(text) != ref["sha256"]:
        raise ConfigurationError(f"{path} does not match the hash recorded upstream")
    return path, text
