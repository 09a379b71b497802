"""Post-hoc artifacts for a finished run directory."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..noise import read_sidecar
from ..stopping import detect_stages
from .io import atomic_write_text, read_metrics, write_csv

HISTOGRAM_BINS = 20


def rejection_histogram(scores: np.ndarray, corrupt_mask: np.ndarray, bins: int = HISTOGRAM_BINS):
    """Counts of rejection scores over ``bins`` equal cells of [0, 1], split by mask."""
    edges = np.linspace(0.0, 1.0, bins + 1)
    clean, _ = np.histogram(np.clip(scores[~corrupt_mask], 0.0, 1.0), bins=edges)
    corrupt, _ = np.histogram(np.clip(scores[corrupt_mask], 0.0, 1.0), bins=edges)
    return edges, clean, corrupt


def run_report(run_dir) -> Path:
    """Write ``rejection_histogram.csv``, ``stages.csv`` and ``report.txt`` into ``run_dir``."""
    run_dir = Path(run_dir)
    rows = read_metrics(run_dir / "metrics.csv")
    summary = json.loads((run_dir / "summary.json").read_text())
    labels = read_sidecar(run_dir / "noisy_labels.gmnl")
    scores = np.load(run_dir / "rejection_scores.npy")
    if scores.shape != labels.corrupt_mask.shape:
        raise OSError(f"{run_dir}: {scores.size} rejection scores for {labels.corrupt_mask.size} labels")

    edges, clean, corrupt = rejection_histogram(scores, labels.corrupt_mask)
    write_csv(run_dir / "rejection_histogram.csv", ["bin_lo", "bin_hi", "clean", "corrupt"],
              ([float(edges[i]), float(edges[i + 1]), int(clean[i]), int(corrupt[i])] for i in range(len(clean))))

    plateau = summary.get("plateau") or {}
    threshold = plateau.get("threshold")
    losses = [r["train_loss_total"] for r in rows]
    if threshold is not None and rows:
        band = plateau["band"]
        half = (band[1] - band[0]) / 2.0
        stages = [s.value for s in detect_stages(losses, threshold, half)]
    else:
        stages = [r["stage"] for r in rows]
    write_csv(run_dir / "stages.csv", ["epoch", "stage"], ([r["epoch"], s] for r, s in zip(rows, stages)))

    lines = [f"run: {run_dir.name}", f"status: {summary.get('status')}", f"epochs: {len(rows)}"]
    if threshold is not None:
        gap = [loss for loss, s in zip(losses, stages) if s == "gap"]
        lines.append(f"plateau threshold: {threshold:.6f} (band {plateau['band'][0]:.6f} .. {plateau['band'][1]:.6f})")
        if gap:
            observed = float(np.mean(gap))
            lines.append(f"observed gap-stage loss: {observed:.6f} over {len(gap)} epochs "
                         f"(difference {observed - threshold:+.6f})")
        else:
            lines.append("observed gap-stage loss: no epoch reached the band")
    else:
        lines.append("plateau threshold: not applicable")
    n_corrupt = int(labels.corrupt_mask.sum())
    lines.append(f"checkpoint epoch: {summary.get('checkpoint_epoch')}")
    lines.append(f"rejection >= 0.5: clean {int(clean[HISTOGRAM_BINS // 2:].sum())} of {int((~labels.corrupt_mask).sum())}, "
                 f"corrupt {int(corrupt[HISTOGRAM_BINS // 2:].sum())} of {n_corrupt}")
    if scores.size:
        lines.append(f"mean rejection: clean {_mean(scores[~labels.corrupt_mask])}, corrupt {_mean(scores[labels.corrupt_mask])}")
    monitors = summary.get("monitors") or {}
    for name in ("aes", "ves"):
        m = monitors.get(name)
        lines.append(f"{name}: {json.dumps(m, sort_keys=True) if m else 'did not fire'}")
    atomic_write_text(run_dir / "report.txt", "\n".join(lines) + "\n")
    return run_dir


def _mean(x: np.ndarray) -> str:
    return f"{float(np.mean(x)):.4f}" if x.size else "n/a"
