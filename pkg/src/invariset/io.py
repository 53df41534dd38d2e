"""Artifact files: sample CSV, horizon JSON, classifier CSV, flat key=value configs.

Floats are written with ``repr`` (shortest round-trip form) so reloading is exact.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .dynamics import ConstraintBox
from .horizon import HorizonReport, Phase1Config
from .identify import LabeledReference, SetClassifier


def _fmt(v) -> str:
    return repr(float(v))


def write_points(path, points):
    points = np.asarray(points, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(points.shape[1])])
        w.writerows([_fmt(v) for v in row] for row in points)


def read_points(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    dim = len(rows[0])
    return np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, dim)


def horizon_to_dict(report: HorizonReport) -> dict:
    cfg = report.config
    return {
        "N": report.n,
        "t_bar": report.t_bar,
        "t_star": report.t_star,
        "theta": [[s, report.n] for s in report.survivors],
        "terminated_by": report.terminated_by,
        "final_horizon": report.final_horizon,
        "steps_simulated": report.steps_simulated,
        "exit_times": [int(t) for t in report.exit_times],
        "phase1_config": {
            "delta_traj": cfg.delta_traj,
            "t_bar_horizon": cfg.t_bar_horizon,
            "max_steps_hard": cfg.max_steps_hard,
            "lockstep": cfg.lockstep,
        },
    }


def horizon_from_dict(d: dict) -> HorizonReport:
    n = int(d["N"])
    return HorizonReport(
        n=n,
        survivors=[int(num) for num, _ in d["theta"]],
        t_bar=int(d["t_bar"]),
        t_star=int(d["t_star"]),
        exit_times=np.array(d["exit_times"], dtype=np.int64),
        terminated_by=d["terminated_by"],
        final_horizon=int(d["final_horizon"]),
        steps_simulated=int(d.get("steps_simulated", 0)),
        config=Phase1Config(**d["phase1_config"]),
    )


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_classifier(path, reference: LabeledReference, delta_star: float, box: ConstraintBox):
    """Two-line metadata block (names, values) followed by the labelled points."""
    dim = box.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "t_star", "delta_star"]
                   + [f"lower{i + 1}" for i in range(dim)] + [f"upper{i + 1}" for i in range(dim)])
        w.writerow([dim, reference.t_star, _fmt(delta_star)]
                   + [_fmt(v) for v in box.lower] + [_fmt(v) for v in box.upper])
        w.writerow([f"x{i + 1}" for i in range(dim)] + ["label"])
        for p, inside in zip(reference.points, reference.inside_mask):
            w.writerow([_fmt(v) for v in p] + ["I" if inside else "O"])


class LoadedClassifier:
    def __init__(self, reference: LabeledReference, delta_star: float, box: ConstraintBox):
        self.reference = reference
        self.delta_star = delta_star
        self.box = box
        self.outer = SetClassifier(reference, delta_star, box)
        self.inner = self.outer.with_radius(-delta_star)


def read_classifier(path) -> LoadedClassifier:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    meta = dict(zip(rows[0], rows[1]))
    dim = int(meta["n"])
    box = ConstraintBox([float(meta[f"lower{i + 1}"]) for i in range(dim)],
                        [float(meta[f"upper{i + 1}"]) for i in range(dim)])
    body = rows[3:]
    pts = np.array([[float(v) for v in r[:dim]] for r in body], dtype=float).reshape(-1, dim)
    labels = [r[dim] for r in body]
    if any(lab not in ("I", "O") for lab in labels):
        raise ValueError(f"{path}: labels must be I or O")
    ref = LabeledReference(pts, np.array([lab == "I" for lab in labels], dtype=bool), int(meta["t_star"]))
    return LoadedClassifier(ref, float(meta["delta_star"]), box)


def read_flat_config(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment. Keys may use - or _."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out
