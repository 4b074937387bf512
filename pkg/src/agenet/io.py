"""Epoch CSV files, JSON model files and atomic output writes."""
from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from collections import OrderedDict
from pathlib import Path

import numpy as np

from agenet.bayes_net import BnModel
from agenet.domain import Dataset, Recording, SleepState, ValidationError
from agenet.gmm import GmmParams

CSV_META = ("patient_id", "recording_id", "pma_weeks", "epoch_index", "sleep_label")
MODEL_FORMAT = "agenet-model"
MODEL_VERSION = 1


class FormatError(ValueError):
    """Malformed input file; the message names the file and line."""


def write_atomic(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    # repr is the shortest string that round-trips the double exactly
    return repr(float(x))


# -- epoch CSV ---------------------------------------------------------------

def dataset_to_csv(dataset: Dataset) -> str:
    lines = [",".join(CSV_META + tuple(dataset.feature_names))]
    for rec in dataset.recordings:
        for i, row in enumerate(rec.epochs):
            label = SleepState(rec.sleep_labels[i]).name if rec.labeled else ""
            meta = [rec.patient_id, rec.recording_id, _fmt(rec.pma_weeks), str(i), label]
            lines.append(",".join(meta + [_fmt(v) for v in row]))
    return "\n".join(lines) + "\n"


def write_dataset(dataset: Dataset, path) -> None:
    write_atomic(path, dataset_to_csv(dataset))


def read_dataset(path) -> Dataset:
    """Parse an epoch CSV; rows are grouped by recording_id in order of first appearance."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file (header row required)") from None
        header = [h.strip() for h in header]
        if tuple(header[:5]) != CSV_META:
            raise FormatError(f"{path}:1: header must start with {','.join(CSV_META)}")
        feature_names = header[5:]
        if not feature_names:
            raise FormatError(f"{path}:1: no feature columns")
        width = len(header)
        recs: "OrderedDict[str, dict]" = OrderedDict()
        for row in reader:
            line = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != width:
                raise FormatError(f"{path}:{line}: expected {width} columns, found {len(row)}")
            pid, rid, pma_s, idx_s, label_s = (c.strip() for c in row[:5])
            try:
                pma = float(pma_s)
                idx = int(idx_s)
                values = [float(c) for c in row[5:]]
            except ValueError as exc:
                raise FormatError(f"{path}:{line}: {exc}") from None
            if label_s:
                try:
                    label = int(SleepState.parse(label_s))
                except ValidationError as exc:
                    raise FormatError(f"{path}:{line}: {exc}") from None
            else:
                label = None
            rec = recs.get(rid)
            if rec is None:
                rec = recs[rid] = {"patient": pid, "pma": pma, "rows": {}, "labels": {}, "line": line}
            elif rec["patient"] != pid or rec["pma"] != pma:
                raise FormatError(f"{path}:{line}: patient_id/pma_weeks changed within recording {rid}")
            if idx in rec["rows"]:
                raise FormatError(f"{path}:{line}: duplicate epoch_index {idx} in recording {rid}")
            rec["rows"][idx] = values
            rec["labels"][idx] = label

    recordings = []
    for rid, rec in recs.items():
        n = len(rec["rows"])
        if sorted(rec["rows"]) != list(range(n)):
            raise FormatError(f"{path}:{rec['line']}: epoch_index of recording {rid} is not contiguous from 0")
        labels = [rec["labels"][i] for i in range(n)]
        if all(v is None for v in labels):
            labels = None
        elif any(v is None for v in labels):
            raise FormatError(f"{path}:{rec['line']}: recording {rid} is only partly labeled")
        recordings.append(
            Recording(rec["patient"], rid, rec["pma"], np.array([rec["rows"][i] for i in range(n)]), labels)
        )
    return Dataset(tuple(recordings), tuple(feature_names))


# -- model file --------------------------------------------------------------

def model_to_dict(model: BnModel, feature_names=None) -> dict:
    gmms = []
    for a, row in enumerate(model.gmms):
        for s, g in enumerate(row):
            gmms.append(
                {
                    "age": a,
                    "state": SleepState(s).name,
                    "weights": g.weights.tolist(),
                    "means": g.means.tolist(),
                    "covariances": g.covariances.tolist(),
                }
            )
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "n_raw_features": model.n_raw_features,
        "feature_names": list(feature_names) if feature_names is not None else None,
        "feature_indices": list(model.feature_indices),
        "standardization": {"shift": model.shift.tolist(), "scale": model.scale.tolist()},
        "qs_prob": model.qs_prob.tolist(),
        "age_log_prior": model.age_log_prior.tolist(),
        "gmms": gmms,
        "training": model.training,
    }


def model_from_dict(doc: dict) -> BnModel:
    if doc.get("format") != MODEL_FORMAT:
        raise FormatError("not an agenet model file")
    if doc.get("version") != MODEL_VERSION:
        raise FormatError(f"unsupported model file version {doc.get('version')}")
    try:
        grid = [[None, None] for _ in range(6)]
        for g in doc["gmms"]:
            grid[int(g["age"])][int(SleepState.parse(g["state"]))] = GmmParams(
                np.array(g["weights"]), np.array(g["means"]), np.array(g["covariances"])
            )
        if any(g is None for row in grid for g in row):
            raise FormatError("model file lacks some of the 12 (age, state) mixtures")
        return BnModel(
            gmms=tuple(tuple(r) for r in grid),
            qs_prob=np.array(doc["qs_prob"]),
            age_log_prior=np.array(doc["age_log_prior"]),
            feature_indices=tuple(doc["feature_indices"]),
            shift=np.array(doc["standardization"]["shift"]),
            scale=np.array(doc["standardization"]["scale"]),
            n_raw_features=int(doc["n_raw_features"]),
            training=doc.get("training") or {},
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"invalid model file: {exc}") from exc


def dumps(doc) -> str:
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def save_model(model: BnModel, path, feature_names=None) -> None:
    write_atomic(path, dumps(model_to_dict(model, feature_names)))


def load_model(path) -> BnModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}: {exc.msg}") from None
    return model_from_dict(doc)


def jsonable(obj):
    """Convert numpy scalars/arrays and NaN to plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if math.isnan(obj) else float(obj)
    return obj
