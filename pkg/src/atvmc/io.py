"""File formats: checkpoints, trajectory CSV and the JSONL event log."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from . import __version__
from .ansatz import Ansatz, ParameterState, make_ansatz

TRAJECTORY_MAGIC = "atvmc-trajectory"
SCHEMA_VERSION = "1.0"
CHECKPOINT_FORMAT = "atvmc-checkpoint"
CHECKPOINT_VERSION = 1


class SchemaError(ValueError):
    pass


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class TrajectoryWriter:
    """Header-carrying CSV, flushed after every record."""

    def __init__(self, path, columns, metadata: dict):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.fh = open(self.path, "w", encoding="utf-8", newline="")
        self.columns = list(columns)
        self.fh.write(f"# {TRAJECTORY_MAGIC}\n")
        self.fh.write(f"# schema_version = {SCHEMA_VERSION}\n")
        self.fh.write(f"# package_version = {__version__}\n")
        for k, v in metadata.items():
            self.fh.write(f"# {k} = {v}\n")
        self._csv = csv.writer(self.fh, lineterminator="\n")
        self._csv.writerow(self.columns)
        self.fh.flush()

    def write(self, row):
        self._csv.writerow([_fmt(v) for v in row])
        self.fh.flush()

    def write_error(self, message: str):
        self.fh.write(f"# error = {message}\n")
        self.fh.flush()

    def close(self):
        self.fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_trajectory(path):
    """Returns (metadata, columns, rows) with rows as dicts of strings."""
    meta = {}
    body = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                content = line[1:].strip()
                if "=" in content:
                    k, v = content.split("=", 1)
                    meta[k.strip()] = v.strip()
                else:
                    meta.setdefault("magic", content)
            else:
                body.append(line)
    version = meta.get("schema_version", "")
    if meta.get("magic") != TRAJECTORY_MAGIC or not version:
        raise SchemaError(f"{path} is not an atvmc trajectory file")
    if version.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
        raise SchemaError(f"unsupported trajectory schema major version {version}")
    reader = csv.DictReader(io.StringIO("".join(body)))
    rows = list(reader)
    return meta, reader.fieldnames, rows


def data_rows(path) -> str:
    """The trajectory body without the metadata header."""
    with open(path, encoding="utf-8") as fh:
        return "".join(line for line in fh if not line.startswith("#"))


class EventLogWriter:
    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.fh = open(self.path, "w", encoding="utf-8")

    def write(self, step, time, events):
        for ev in events:
            rec = {"step": int(step), "time": float(time)}
            rec.update(ev.as_dict())
            self.fh.write(json.dumps(rec, sort_keys=True) + "\n")
        self.fh.flush()

    def close(self):
        self.fh.close()


def save_checkpoint(path, ansatz: Ansatz, params: ParameterState, info: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "ansatz": {
            "kind": ansatz.kind,
            "n_sites": ansatz.n_sites,
            "density": getattr(ansatz, "density", None),
        },
        "info": info,
        "parameters": [[lab, re, im] for lab, re, im in params.to_records()],
    }
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise SchemaError(f"{path} is not an atvmc checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise SchemaError(f"unsupported checkpoint version {doc.get('version')}")
    spec = doc["ansatz"]
    ansatz = make_ansatz(spec["kind"], spec["n_sites"], spec.get("density"))
    labels = [rec[0] for rec in doc["parameters"]]
    if tuple(labels) != ansatz.labels:
        raise SchemaError("checkpoint parameter labels do not match the ansatz")
    values = np.array([complex(rec[1], rec[2]) for rec in doc["parameters"]])
    return ansatz, ansatz.new_state(values), doc.get("info", {})
