"""Delimited report writers and their companion figures."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import EvalReport, SweepCurve

EVAL_CSV_COLUMNS = [
    "ap_50", "ap_50_95", "precision", "recall", "f1", "fppi",
    "tp", "fp", "fn", "conf_thr", "iou_thr",
]
SWEEP_CSV_COLUMNS = ["conf", "precision", "recall", "f1", "fppi"]


def write_eval_report(report: EvalReport, json_path, csv_path) -> None:
    d = report.to_dict()
    with open(json_path, "w") as fh:
        json.dump(d, fh, indent=2)
        fh.write("\n")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=EVAL_CSV_COLUMNS)
        writer.writeheader()
        writer.writerow(d)


def write_sweep_csv(curve: SweepCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_COLUMNS)
        for point in curve.points:
            writer.writerow([f"{v:.6g}" for v in point])


def read_sweep_csv(path) -> list[tuple[float, ...]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SWEEP_CSV_COLUMNS:
            raise ValueError(f"unexpected sweep CSV header {header}")
        return [tuple(float(v) for v in row) for row in reader]


def plot_sweep(curve: SweepCurve, path) -> None:
    """F1/precision/recall against the confidence threshold, best point marked."""
    conf = [p[0] for p in curve.points]
    fig, (ax, ax2) = plt.subplots(
        2, 1, figsize=(7, 6), sharex=True, height_ratios=[2, 1]
    )
    ax.plot(conf, [p[3] for p in curve.points], label="F1", lw=2)
    ax.plot(conf, [p[1] for p in curve.points], label="precision", alpha=0.7)
    ax.plot(conf, [p[2] for p in curve.points], label="recall", alpha=0.7)
    ax.axvline(curve.best_conf, color="k", ls=":", lw=1)
    ax.annotate(
        f"best F1 {curve.best_f1:.3f} @ {curve.best_conf:.3f}",
        xy=(curve.best_conf, curve.best_f1),
        xytext=(5, 5),
        textcoords="offset points",
        fontsize=9,
    )
    ax.set_ylabel("score")
    ax.set_ylim(-0.02, 1.05)
    ax.legend(loc="lower left")
    ax2.plot(conf, [p[4] for p in curve.points], color="tab:red")
    ax2.set_ylabel("FPPI")
    ax2.set_xlabel("confidence threshold")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_decision_timeline(records: list[dict], path) -> None:
    """Strip chart of decision sources over the frame index axis."""
    order = {"none": 0, "held": 1, "held_sim": 2, "fresh": 3}
    frames = [r["frame"] for r in records]
    values = [order.get(r["source"], 0) for r in records]
    fig, ax = plt.subplots(figsize=(8, 2.4))
    ax.step(frames, values, where="post", lw=1)
    ax.set_yticks(list(order.values()), list(order.keys()))
    ax.set_xlabel("frame")
    ax.set_title("mask decision source")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def ensure_parent(path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p
