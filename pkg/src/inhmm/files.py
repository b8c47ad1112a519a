"""On-disk formats: dataset CSVs, posterior JSONL and atomic writes."""

from __future__ import annotations

import csv
import json
import os
import tempfile

import numpy as np

from .model import TransitionParams, emission_from_dict
from .sampler import PosteriorSample


class DataError(ValueError):
    pass


def atomic_write_text(path, text):
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _parse_float(value, row, col):
    try:
        out = float(value)
    except ValueError:
        raise DataError(f"row {row}: column {col!r} is not numeric ({value!r})") from None
    if not np.isfinite(out):
        raise DataError(f"row {row}: column {col!r} is not finite")
    return out


def read_table(path, require_y=True):
    """Parse ``t,x1..xp[,y]`` into (t, X, y or None). Rows are numbered from 1 after the header."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r and not r[0].startswith("#")]
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if header[0] != "t":
        raise DataError(f"{path}: first column must be 't', got {header[0]!r}")
    x_cols = [h for h in header[1:] if h != "y"]
    if not x_cols or x_cols != [f"x{i + 1}" for i in range(len(x_cols))]:
        raise DataError(f"{path}: expected covariate columns x1..xp, got {header[1:]}")
    has_y = "y" in header
    if require_y and (not has_y or header[-1] != "y"):
        raise DataError(f"{path}: last column must be 'y'")
    if len(rows) < 2:
        raise DataError(f"{path} has no data rows")
    data = np.empty((len(rows) - 1, len(header)))
    for i, r in enumerate(rows[1:], start=1):
        if len(r) != len(header):
            raise DataError(f"row {i}: expected {len(header)} fields, got {len(r)}")
        for c, (name, value) in enumerate(zip(header, r)):
            data[i - 1, c] = _parse_float(value.strip(), i, name)
    t = data[:, 0]
    if np.any(np.diff(t) <= 0):
        bad = int(np.argmax(np.diff(t) <= 0)) + 2
        raise DataError(f"row {bad}: t must be strictly increasing")
    X = data[:, 1 : 1 + len(x_cols)]
    y = data[:, -1] if has_y else None
    return t, X, y


def write_table(path, t, X, y=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    cols = ["t"] + [f"x{i + 1}" for i in range(X.shape[1])] + (["y"] if y is not None else [])
    lines = [",".join(cols)]
    for i in range(X.shape[0]):
        vals = [_fmt(t[i])] + [repr(float(v)) for v in X[i]]
        if y is not None:
            vals.append(repr(float(y[i])))
        lines.append(",".join(vals))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _fmt(v):
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def _matrix(a):
    a = np.asarray(a, dtype=float)
    return {"rows": int(a.shape[0]), "cols": int(a.shape[1]), "data": a.ravel().tolist()}


def _from_matrix(m):
    return np.asarray(m["data"], dtype=float).reshape(m["rows"], m["cols"])


def sample_to_record(sample: PosteriorSample, seed) -> dict:
    return {
        "iter": int(sample.iter),
        "z": sample.z.tolist(),
        "K": int(sample.K),
        "alpha": _matrix(sample.trans.alpha),
        "beta": sample.trans.beta.tolist(),
        "x_star": _matrix(sample.trans.x_star),
        "emission": sample.emit.to_dict(),
        "seed": int(seed),
    }


def record_to_sample(rec: dict) -> PosteriorSample:
    trans = TransitionParams(_from_matrix(rec["alpha"]), np.asarray(rec["beta"], dtype=float),
                             _from_matrix(rec["x_star"]))
    return PosteriorSample(int(rec["iter"]), np.asarray(rec["z"], dtype=np.int64), trans,
                           emission_from_dict(rec["emission"]))


def write_samples(path, samples, seed):
    text = "".join(json.dumps(sample_to_record(s, seed), separators=(",", ":")) + "\n" for s in samples)
    atomic_write_text(path, text)


def read_samples(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(record_to_sample(json.loads(line)))
            except (ValueError, KeyError) as exc:
                raise DataError(f"{path} line {i}: malformed sample ({exc})") from exc
    return out
