"""Reading and writing data CSVs, fitted-model JSON and ground-truth JSON."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .mixture import ModelParams
from .penalty import PenaltyStrategy

__all__ = [
    "SCHEMA_VERSION",
    "DataParseError",
    "read_data_csv",
    "write_data_csv",
    "fit_to_dict",
    "write_fit_json",
    "read_fit_json",
    "write_truth_json",
    "read_truth_json",
    "file_digest",
    "standardize",
]

SCHEMA_VERSION = 1


class DataParseError(ValueError):
    """Malformed input file."""


def read_data_csv(path, label_column="label"):
    """Parse a numeric CSV with a header row.

    Returns ``(X, labels, columns)``; ``labels`` is ``None`` when there is
    no ``label_column``. Errors name the offending line (1-based, header is
    line 1) and column.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        lab_idx = header.index(label_column) if label_column in header else None
        feat_idx = [i for i in range(len(header)) if i != lab_idx]
        if not feat_idx:
            raise DataParseError(f"{path}: no numeric columns")
        rows, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataParseError(
                    f"{path}: line {line_no} has {len(row)} fields, expected {len(header)}")
            vals = []
            for i in feat_idx:
                cell = row[i].strip()
                if cell == "" or cell.lower() in ("na", "nan"):
                    raise DataParseError(f"{path}: missing value at line {line_no}, column {header[i]!r}")
                try:
                    v = float(cell)
                except ValueError:
                    raise DataParseError(
                        f"{path}: non-numeric value {cell!r} at line {line_no}, column {header[i]!r}") from None
                if not np.isfinite(v):
                    raise DataParseError(f"{path}: non-finite value at line {line_no}, column {header[i]!r}")
                vals.append(v)
            rows.append(vals)
            if lab_idx is not None:
                labels.append(row[lab_idx].strip())
    if not rows:
        raise DataParseError(f"{path}: no data rows")
    X = np.array(rows, dtype=float)
    lab = None
    if lab_idx is not None:
        # map arbitrary label strings to 0..K-1 in sorted order
        uniq = sorted(set(labels), key=_label_key)
        code = {u: i for i, u in enumerate(uniq)}
        lab = np.array([code[v] for v in labels], dtype=int)
    return X, lab, [header[i] for i in feat_idx]


def _label_key(v):
    try:
        return (0, float(v), v)
    except ValueError:
        return (1, 0.0, v)


def write_data_csv(path, X, labels=None, columns=None):
    X = np.asarray(X, dtype=float)
    columns = columns or [f"x{j + 1}" for j in range(X.shape[1])]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(columns) + (["label"] if labels is not None else []))
        for i, row in enumerate(X):
            cells = [repr(float(v)) for v in row]
            if labels is not None:
                cells.append(str(int(labels[i])))
            w.writerow(cells)


def standardize(X, columns=None):
    """Center and scale each column to unit (population) variance.

    Returns ``(Z, center, scale)``. A zero-variance column raises
    ``DataParseError`` naming it.
    """
    X = np.asarray(X, dtype=float)
    center = X.mean(axis=0)
    scale = X.std(axis=0)
    bad = np.flatnonzero(scale == 0)
    if bad.size:
        name = columns[bad[0]] if columns else f"#{bad[0] + 1}"
        raise DataParseError(f"column {name!r} has zero variance; cannot standardize")
    return (X - center) / scale, center, scale


def fit_to_dict(report, **extra):
    params = report.params
    doc = {
        "schema_version": SCHEMA_VERSION,
        "n": int(report.n),
        "p": int(params.p),
        "K": int(params.K),
        "lambda": float(report.lam),
        "strategy": PenaltyStrategy(report.strategy).value,
        "pi": params.pi.tolist(),
        "mu": params.mu.tolist(),
        "omega": params.omega.tolist(),
        "d0": int(report.d0),
        "bic": float(report.bic),
        "loglik": float(report.unpenalized_loglik),
        "penalized_loglik": float(report.penalized_loglik),
        "iterations": int(report.iterations),
        "converged": bool(report.converged),
    }
    doc.update(extra)
    return doc


def _dump(doc, path):
    text = json.dumps(doc, indent=1, sort_keys=False)
    Path(path).write_text(text + "\n")


def write_fit_json(path, report, **extra):
    _dump(fit_to_dict(report, **extra), path)


def read_fit_json(path):
    """Load a fit document; returns ``(ModelParams, doc)``."""
    doc = json.loads(Path(path).read_text())
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DataParseError(f"{path}: unsupported schema_version {version!r}")
    params = ModelParams(np.array(doc["pi"]), np.array(doc["mu"]), np.array(doc["omega"]))
    return params, doc


def write_truth_json(path, scenario, truth, **extra):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario.to_dict(),
        "seed": int(scenario.seed),
        "omegas": [np.asarray(o).tolist() for o in truth.omegas],
    }
    doc.update(extra)
    _dump(doc, path)


def read_truth_json(path):
    doc = json.loads(Path(path).read_text())
    return [np.array(o) for o in doc["omegas"]], doc


def file_digest(path):
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
