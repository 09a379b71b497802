"""Training and sweep orchestration with on-disk run directories.

A run directory holds::

    config.json            the RunConfig exactly as given
    metrics.csv            one EpochRecord per epoch
    summary.json           accuracies, stopping decisions, plateau threshold
    checkpoint.gmbl        parameters at the reported epoch
    noisy_labels.gmnl      clean / noisy / mask for the training rows
    rejection_scores.npy   training-set rejection mass at the reported epoch
"""

from __future__ import annotations

import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import __version__
from ..data import generate_blobs, load_mnist, subset_split
from ..exceptions import DivergenceError, InvalidInputError
from ..losses import LossKind, check_lambda
from ..model import LossConfig, MlpSpec, TrainState, forward, save_checkpoint, train_epoch
from ..noise import CorruptedDataset, CorruptedLabels, inject, write_sidecar
from ..numerics import RNG_ALGORITHM, spawn_rngs
from ..schedule import LambdaSchedule
from ..stopping import AesConfig, Decision, VesConfig, aes_scan, detect_stages, ves_scan
from ..theory import plateau_threshold
from .config import RunConfig
from .io import SUMMARY_VERSION, atomic_write_bytes, atomic_write_text, write_csv, write_json, write_metrics

THREADS_ENV = "GMBL_THREADS"
MNIST_ENV = "GMBL_MNIST_DIR"
SWEEP_COLUMNS = ["lambda", "final_train_acc", "final_test_acc", "abstain_fraction", "final_train_loss"]


class PreparedData:
    def __init__(self, train: CorruptedDataset, labels: CorruptedLabels, val, test, num_classes: int):
        self.train = train
        self.labels = labels
        self.val = val
        self.test = test
        self.num_classes = num_classes


def _mnist_dir(cfg: RunConfig) -> Path:
    return Path(cfg.dataset.mnist_dir or os.environ.get(MNIST_ENV) or "data/mnist")


def prepare_data(cfg: RunConfig, rng: np.random.Generator) -> PreparedData:
    """Split, then corrupt the training and validation labels together."""
    d = cfg.dataset
    if d.name == "blobs":
        n_test = 2000 if d.n_test is None else d.n_test
        full = generate_blobs(d.n_train + n_test, d.num_classes, d.dim, d.separation, rng)
        train, val, test = subset_split(full, d.n_train, d.val_fraction, rng)
    else:
        full = load_mnist(_mnist_dir(cfg), "train")
        train, val, _ = subset_split(full, d.n_train, d.val_fraction, rng)
        test = load_mnist(_mnist_dir(cfg), "test")
        if d.n_test is not None:
            test = test.take(rng.permutation(len(test))[: d.n_test])
    m = d.num_classes
    labels = inject(np.concatenate([train.y, val.y]), m, cfg.noise)
    n = len(train)
    train_labels = CorruptedLabels(labels.noisy_labels[:n], labels.clean_labels[:n], labels.corrupt_mask[:n])
    corrupted = CorruptedDataset.from_labels(train.X, train_labels)
    val_pair = (val.X, labels.noisy_labels[n:]) if len(val) else None
    return PreparedData(corrupted, train_labels, val_pair, (test.X, test.y), m)


def loss_setup(cfg: RunConfig) -> tuple[LossConfig, LambdaSchedule]:
    kind = LossKind(cfg.loss.kind)
    m = cfg.dataset.num_classes
    mode = {LossKind.GAMBLER_SCHED_EUC: "euc", LossKind.GAMBLER_SCHED_EXP: "exp"}.get(kind, "fixed")
    fixed = cfg.fixed_lambda if kind is LossKind.GAMBLER else (float(m) if mode == "fixed" else None)
    sched = LambdaSchedule(mode, fixed, cfg.loss.warmup_epochs)
    return LossConfig(kind, cfg.loss.q, cfg.loss.mask_rejection), sched


def plateau_for(cfg: RunConfig) -> float | None:
    a, lam = cfg.plateau_clean_rate, cfg.aes_lambda
    if a is None or lam is None or not 0.5 <= a <= 1.0:
        return None
    return plateau_threshold(a, lam).threshold


def _copy_params(params):
    return [(W.copy(), b.copy()) for W, b in params]


def _run_once(cfg: RunConfig, out: Path) -> dict:
    data_rng, init_rng, shuffle_rng = spawn_rngs(cfg.seed, 3)
    data = prepare_data(cfg, data_rng)
    m = data.num_classes
    spec = MlpSpec((data.train.inputs.shape[1], *cfg.model.hidden, m + 1), cfg.model.activation, cfg.model.init_scale)
    state = TrainState.create(spec, cfg.optimizer, init_rng)
    losscfg, sched = loss_setup(cfg)
    write_sidecar(out / "noisy_labels.gmnl", data.labels)

    st = cfg.stopping
    threshold = plateau_for(cfg)
    aes_cfg = None
    if threshold is not None:
        aes_cfg = AesConfig(cfg.plateau_clean_rate, cfg.aes_lambda, st.band, st.smoothing_window, st.min_epochs)
    ves_cfg = VesConfig(st.patience) if data.val is not None else None

    records = []
    aes_out = ves_out = None
    best_val, best_val_params = -math.inf, None
    chosen_params, chosen_epoch, decision = None, None, Decision.CONTINUE
    status, error = "ok", None
    try:
        for _ in range(cfg.epochs):
            state, rec = train_epoch(state, data.train, losscfg, sched, shuffle_rng, test=data.test, val=data.val)
            records.append(rec)
            losses = [r.train_loss_total for r in records]
            if threshold is not None:
                rec.stage = detect_stages(losses, threshold, st.band, st.smoothing_window)[-1].value
            if aes_cfg is not None and aes_out is None:
                o = aes_scan(losses, aes_cfg)
                if o.decision is not Decision.CONTINUE:
                    aes_out = o
                    if st.kind == "aes":
                        chosen_params, chosen_epoch, decision = _copy_params(state.params), o.epoch, o.decision
            if ves_cfg is not None:
                if rec.val_acc > best_val:
                    best_val, best_val_params = rec.val_acc, _copy_params(state.params)
                if ves_out is None:
                    o = ves_scan([r.val_acc for r in records], ves_cfg)
                    if o.decision is Decision.STOP:
                        ves_out = o
                        if st.kind == "ves":
                            chosen_params, chosen_epoch, decision = best_val_params, o.best_epoch, o.decision
            if chosen_epoch is not None and st.halt:
                break
    except DivergenceError as exc:
        status, error = "diverged", str(exc)

    if chosen_params is None:
        chosen_params, chosen_epoch = state.params, (records[-1].epoch if records else 0)
    write_metrics(out / "metrics.csv", records)
    save_checkpoint(out / "checkpoint.gmbl", spec, chosen_params)
    if losscfg.kind.uses_rejection and not losscfg.mask_rejection:
        rejection = forward(chosen_params, data.train.inputs, spec.activation)[:, 0]
    else:
        rejection = np.zeros(len(data.train.noisy_labels))
    buf = io.BytesIO()
    np.save(buf, rejection)
    atomic_write_bytes(out / "rejection_scores.npy", buf.getvalue())

    by_epoch = {r.epoch: r for r in records}

    def test_at(epoch):
        r = by_epoch.get(epoch)
        return r.test_acc if r is not None else None

    band = None if threshold is None else [threshold - st.band, threshold + st.band]
    band_epochs = [r.epoch for r in records if r.stage == "gap"]
    final = records[-1] if records else None
    best = max(records, key=lambda r: r.test_acc) if records else None
    return {
        "version": SUMMARY_VERSION,
        "package_version": __version__,
        "status": status,
        "error": error,
        "rng": RNG_ALGORITHM,
        "epochs_run": len(records),
        "final": None if final is None else {
            "epoch": final.epoch, "train_acc": final.train_acc, "test_acc": final.test_acc,
            "val_acc": final.val_acc, "train_loss": final.train_loss_total,
            "abstain_fraction": final.abstain_fraction,
        },
        "best_test": None if best is None else {"epoch": best.epoch, "test_acc": best.test_acc},
        "stopping": {
            "kind": st.kind,
            "decision": decision.value,
            "epoch": chosen_epoch,
            "test_acc": test_at(chosen_epoch),
            "stage": by_epoch[chosen_epoch].stage if chosen_epoch in by_epoch else None,
        },
        "monitors": {
            "aes": None if aes_out is None else {
                "decision": aes_out.decision.value, "epoch": aes_out.epoch, "test_acc": test_at(aes_out.epoch),
            },
            "ves": None if ves_out is None else {
                "stop_epoch": ves_out.stop_epoch, "best_epoch": ves_out.best_epoch,
                "test_acc": test_at(ves_out.best_epoch),
            },
        },
        "plateau": {
            "threshold": threshold, "band": band, "clean_rate": cfg.plateau_clean_rate,
            "lambda": cfg.aes_lambda, "gap_epochs": band_epochs,
        },
        "noise": {
            "kind": cfg.noise.kind, "rate": cfg.noise.rate,
            "effective_rate_train": data.labels.effective_rate,
        },
        "data": {"num_train": len(data.train.noisy_labels),
                 "num_val": 0 if data.val is None else len(data.val[1]),
                 "num_test": len(data.test[1]), "num_classes": m},
        "checkpoint_epoch": chosen_epoch,
        "learning_rate": cfg.optimizer.learning_rate,
    }


def run_train(cfg: RunConfig, out_dir=None) -> Path:
    """Train one configuration and persist the run directory.

    A divergence still writes every artifact, with ``status: diverged`` in
    the summary, and is then re-raised.
    """
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "config.json", cfg.to_json() + "\n")
    effective = cfg
    retries_used = 0
    while True:
        summary = _run_once(effective, out)
        aes = summary["monitors"]["aes"]
        overshoot = aes is not None and aes["decision"] == Decision.OVERSHOOT_WARNING.value
        if not (overshoot and effective.stopping.kind == "aes" and effective.stopping.overshoot_retries > 0):
            break
        retries_used += 1
        effective = replace(
            effective,
            optimizer=replace(effective.optimizer, learning_rate=effective.optimizer.learning_rate / 2),
            stopping=replace(effective.stopping, overshoot_retries=effective.stopping.overshoot_retries - 1),
        )
    summary["overshoot_retries_used"] = retries_used
    write_json(out / "summary.json", summary)
    if summary["status"] == "diverged":
        raise DivergenceError(summary["error"])
    return out


def _thread_cap() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise InvalidInputError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise InvalidInputError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


def _member(args):
    cfg, out = args
    run_train(cfg, out)
    return out


def run_sweep(base: RunConfig, lambda_grid, out_dir=None) -> Path:
    """One run per payoff in ``lambda_grid`` plus ``sweep.csv`` and ``sweep.json``.

    Member runs execute in up to ``GMBL_THREADS`` worker processes.
    """
    grid = [float(x) for x in lambda_grid]
    if not grid:
        raise InvalidInputError("lambda grid is empty")
    if LossKind(base.loss.kind) is not LossKind.GAMBLER:
        raise InvalidInputError("a sweep needs the fixed-lambda gambler loss")
    m = base.dataset.num_classes
    for lam in grid:
        check_lambda(lam, m)
    out = Path(out_dir if out_dir is not None else base.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "base_config.json", base.to_json() + "\n")
    jobs = []
    for lam in grid:
        run_dir = out / f"lambda_{lam:g}"
        cfg = replace(base, loss=replace(base.loss, lam=lam), out_dir=str(run_dir))
        jobs.append((cfg, run_dir))
    workers = min(_thread_cap(), len(jobs))
    if workers == 1:
        dirs = [_member(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            dirs = list(pool.map(_member, jobs))

    rows = []
    for lam, d in zip(grid, dirs):
        final = json.loads((d / "summary.json").read_text())["final"]
        rows.append([lam, final["train_acc"], final["test_acc"], final["abstain_fraction"], final["train_loss"]])
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    chance = 1.0 / m
    below = [r[0] for r in rows if r[1] < chance + 0.05]
    write_json(out / "sweep.json", {
        "lambda_grid": grid,
        "chance": chance,
        "lambda_crit": max(below) if below else None,
        "runs": [str(d.name) for d in dirs],
    })
    return out
