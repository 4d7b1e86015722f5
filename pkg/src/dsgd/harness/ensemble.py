"""Seeded ensembles of optimization runs, measurement-cost ledgers and summary CSVs."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..estimators import (EpochBatcher, EstimatorConfig, Regularizer, add_regularizer, estimate_mse,
                          estimate_vqe, mse_cost, vqe_cost)
from ..optimizers import RunTrace, run
from ..rng import RngStream
from ..tasks.classifier import ClassifierTask, load_classification_data
from ..tasks.maxcut import build_maxcut, random_maxcut_instance
from ..tasks.tfim import build_tfim
from .config import ExperimentSpec, TaskSpec

SUMMARY_COLUMNS = ("step", "loss_min", "loss_mean", "loss_max", "alpha_mean", "meas_cum", "circ_cum")
TRACE_COLUMNS = RunTrace.COLUMNS
FLUSH_EVERY = 50


# -- task construction ------------------------------------------------------------------


def build_task(task: TaskSpec):
    if task.kind == "tfim":
        return build_tfim(task.num_qubits, task.num_blocks)
    if task.kind == "maxcut":
        edges = task.edges
        if edges is None:
            edges = random_maxcut_instance(task.num_vertices, task.num_edges, RngStream(task.graph_seed, ("graph",)))
        return build_maxcut(edges, task.depth, task.num_vertices)
    data = load_classification_data(task.data_source, directory=task.data_dir, num_qubits=task.num_qubits,
                                    num_train=task.num_train, num_validation=task.num_validation,
                                    seed=task.data_seed, teacher_blocks=task.teacher_blocks, margin=task.margin)
    return ClassifierTask(task.num_qubits, task.num_blocks, data)


def reference_cost(task, batch_size: int = 1) -> int:
    """MC_1: measurements per step of the ungrouped 1-shot full estimator."""
    if isinstance(task, ClassifierTask):
        return mse_cost(task.rule, len(task.observable), EstimatorConfig(1, batch_size=batch_size))[0]
    return vqe_cost(task.rule, len(task.hamiltonian), EstimatorConfig(1))[0]


def steps_for(spec: ExperimentSpec, task) -> int:
    if isinstance(task, ClassifierTask) and spec.task.epochs is not None:
        return spec.task.epochs * math.ceil(len(task.data.train) / spec.estimator.batch_size)
    return spec.optimizer.max_steps


def make_grad_fn(task, config: EstimatorConfig, run_stream: RngStream, l2: float = 0.0):
    """``grad_fn(theta, step, stream)`` for :func:`dsgd.optimizers.run`."""
    reg = Regularizer(l2)
    if isinstance(task, ClassifierTask):
        batcher = None
        if config.batch_mode == "shuffle":
            batcher = EpochBatcher(len(task.data.train), config.batch_size, run_stream.child("batches"))

        def grad_fn(theta, t, stream):
            batch = None if batcher is None else batcher.batch(t - 1)
            est = estimate_mse(task.model, task.observable, theta, task.data.train, config, stream,
                               batch=batch, rule=task.rule)
            return add_regularizer(est, reg, theta) if l2 else est
    else:
        def grad_fn(theta, t, stream):
            est = estimate_vqe(task.circuit, task.hamiltonian, theta, config, stream, rule=task.rule)
            return add_regularizer(est, reg, theta) if l2 else est
    return grad_fn


def make_loss_fn(task, l2: float = 0.0):
    reg = Regularizer(l2)
    if l2:
        return lambda theta: task.loss(theta) + reg.value(theta)
    return task.loss


# -- single runs and ensembles ----------------------------------------------------------


@dataclass
class RunResult:
    index: int
    seed: int
    trace: RunTrace
    extras: dict = field(default_factory=dict)


class _TraceWriter:
    """Buffers trace rows and appends them to a CSV every ``FLUSH_EVERY`` steps."""

    def __init__(self, path: Path | None, every: int):
        self.path = path
        self.every = every
        self.buffer: list[tuple] = []
        if path is not None:
            with open(path, "w", newline="") as fh:
                csv.writer(fh).writerow(TRACE_COLUMNS)

    def __call__(self, t, row):
        if self.path is None or t % self.every:
            return
        self.buffer.append(row)
        if t % FLUSH_EVERY == 0:
            self.flush()

    def flush(self):
        if self.path is None or not self.buffer:
            return
        with open(self.path, "a", newline="") as fh:
            writer = csv.writer(fh)
            for row in self.buffer:
                writer.writerow(_fmt_row(row))
        self.buffer = []


def _fmt_row(row) -> list[str]:
    return [str(v) if isinstance(v, (int, np.integer)) else repr(float(v)) for v in row]


def run_single(spec: ExperimentSpec, index: int, task=None, out_dir: Path | None = None) -> RunResult:
    """Run ``index`` of the ensemble with seed ``spec.seed + index``."""
    task = build_task(spec.task) if task is None else task
    seed = spec.seed + index
    stream = RngStream(seed, ("run",))
    theta0 = task.initial_theta(stream)
    optimizer = replace(spec.optimizer, max_steps=steps_for(spec, task))
    writer = _TraceWriter(None if out_dir is None else out_dir / f"trace_{index:03d}.csv", spec.trace_every)
    extras: dict = {}
    loss_fn = make_loss_fn(task, spec.l2)
    grad_fn = make_grad_fn(task, spec.estimator, stream, spec.l2)
    if isinstance(task, ClassifierTask):
        per_epoch = math.ceil(len(task.data.train) / spec.estimator.batch_size)
        trace = run(loss_fn, grad_fn, theta0, optimizer, stream.child("steps"), callback=writer,
                    snapshot_every=per_epoch)
        extras["val_accuracy"] = [task.accuracy(trace.snapshots[t]) for t in sorted(trace.snapshots) if t]
    else:
        trace = run(loss_fn, grad_fn, theta0, optimizer, stream.child("steps"), callback=writer)
    writer.flush()
    return RunResult(index, seed, trace, extras)


def _run_job(args):
    spec, index, out_dir = args
    return run_single(spec, index, out_dir=out_dir)


@dataclass
class Ensemble:
    spec: ExperimentSpec
    runs: list[RunResult]
    mc1: int
    ground_energy: float | None
    summary: dict

    def final_losses(self) -> np.ndarray:
        return np.array([r.trace.final_loss for r in self.runs])


def summarize(traces: list[RunTrace], every: int = 1) -> dict:
    """Per-step min/mean/max of the loss across runs, carrying finished runs forward."""
    length = max(len(t) for t in traces)

    def padded(col):
        out = np.empty((len(traces), length))
        for i, t in enumerate(traces):
            v = getattr(t, col)
            out[i, :len(v)] = v
            out[i, len(v):] = v[-1]
        return out

    loss = padded("loss")
    keep = np.unique(np.concatenate([np.arange(0, length, every), [length - 1]]))
    return {
        "step": keep,
        "loss_min": loss.min(axis=0)[keep],
        "loss_mean": loss.mean(axis=0)[keep],
        "loss_max": loss.max(axis=0)[keep],
        "alpha_mean": padded("alpha").mean(axis=0)[keep],
        "meas_cum": padded("meas_cum").mean(axis=0)[keep],
        "circ_cum": padded("circ_cum").mean(axis=0)[keep],
    }


def write_summary(summary: dict, path, mc1: int, ground_energy: float | None = None) -> None:
    with open(path, "w", newline="") as fh:
        comment = f"# mc1={mc1}"
        if ground_energy is not None:
            comment += f" ground_energy={ground_energy!r}"
        fh.write(comment + "\n")
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for i in range(summary["step"].shape[0]):
            row = [summary[c][i] for c in SUMMARY_COLUMNS]
            row[0] = int(row[0])
            row[5], row[6] = _int_if_whole(row[5]), _int_if_whole(row[6])
            writer.writerow(_fmt_row(row))


def _int_if_whole(v):
    return int(v) if float(v).is_integer() else float(v)


def read_summary(path) -> tuple[dict, dict]:
    """Columns and the ``# key=value`` header metadata of a summary CSV."""
    with open(path) as fh:
        meta_line = fh.readline()
        rows = list(csv.reader(fh))
    meta = dict(tok.split("=", 1) for tok in meta_line.lstrip("#").split())
    header, body = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    return {c: body[:, i] for i, c in enumerate(header)}, meta


def run_ensemble(spec: ExperimentSpec, out_dir=None, jobs: int = 1) -> Ensemble:
    """Run ``spec.repeats`` seeds and, if ``out_dir`` is given, write traces and ``summary.csv``.

    Results are merged by run index, so output does not depend on completion order.
    """
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
    task = build_task(spec.task)
    if jobs > 1 and spec.repeats > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_job, [(spec, i, out) for i in range(spec.repeats)]))
    else:
        runs = [run_single(spec, i, task, out) for i in range(spec.repeats)]
    runs.sort(key=lambda r: r.index)
    mc1 = reference_cost(task, spec.estimator.batch_size)
    ground = getattr(task, "ground_energy", None)
    summary = summarize([r.trace for r in runs], spec.trace_every)
    if out is not None:
        write_summary(summary, out / "summary.csv", mc1, ground)
    return Ensemble(spec, runs, mc1, ground, summary)


# -- measurement frontiers ----------------------------------------------------------------


def compare_measurement_frontiers(ensembles: list[Ensemble], threshold: float | None = None) -> dict:
    """Mean-loss curves of several ensembles on a shared grid of ``meas_cum / MC_1``.

    Each curve is a step function carried forward from its last recorded point.
    Returns the grid, one column per ensemble, and (with ``threshold``) the first
    normalized measurement count at which each mean curve reaches it.
    """
    if not ensembles:
        raise ValueError("nothing to compare")
    ref = ensembles[0].spec.task
    for e in ensembles[1:]:
        if e.spec.task != ref:
            raise ValueError("compared experiments must share a task")
    mc1 = ensembles[0].mc1
    curves = [(e.summary["meas_cum"] / mc1, e.summary["loss_mean"]) for e in ensembles]
    grid = np.unique(np.concatenate([x for x, _ in curves]))
    out = {"meas_over_mc1": grid}
    reached = {}
    for e, (x, y) in zip(ensembles, curves):
        pos = np.searchsorted(x, grid, side="right") - 1
        col = np.where(pos >= 0, y[np.clip(pos, 0, None)], np.nan)
        out[e.spec.name] = col
        if threshold is not None:
            hit = np.flatnonzero(y <= threshold)
            reached[e.spec.name] = float(x[hit[0]]) if hit.size else float("inf")
    return {"columns": out, "reached": reached}


def write_frontiers(result: dict, path) -> None:
    cols = result["columns"]
    names = list(cols)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(cols[names[0]].shape[0]):
            writer.writerow([repr(float(cols[n][i])) for n in names])
