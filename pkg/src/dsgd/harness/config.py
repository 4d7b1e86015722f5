"""Experiment specifications: an INI file with [task], [estimator], [optimizer] and [experiment] sections."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..estimators import EstimatorConfig
from ..optimizers import OptimizerConfig

TASK_KINDS = ("tfim", "maxcut", "classifier")

# allowed keys and their parsers per section
_INT, _FLOAT, _STR = int, float, str


def _shots(value: str):
    return None if value.strip().lower() == "exact" else int(value)


def _optional_float(value: str):
    return None if value.strip().lower() in ("", "none") else float(value)


def _edges(value: str):
    out = []
    for tok in value.replace(",", " ").split():
        a, b = tok.split("-")
        out.append((int(a), int(b)))
    return tuple(out)


TASK_KEYS = {
    "kind": _STR, "num_qubits": _INT, "num_blocks": _INT,
    "edges": _edges, "num_vertices": _INT, "num_edges": _INT, "graph_seed": _INT, "depth": _INT,
    "data_source": _STR, "data_dir": _STR, "num_train": _INT, "num_validation": _INT, "data_seed": _INT,
    "margin": _FLOAT, "teacher_blocks": _INT, "epochs": _INT,
}
ESTIMATOR_KEYS = {
    "shots": _shots, "hamiltonian_sampling": _STR, "shift_sampling": _STR, "weighting": _STR,
    "batch_size": _INT, "batch_mode": _STR, "l2": _FLOAT,
}
OPTIMIZER_KEYS = {
    "strategy": _STR, "alpha0": _FLOAT, "window": _INT, "decay_factor": _FLOAT, "beta1": _FLOAT,
    "beta2": _FLOAT, "epsilon": _FLOAT, "max_steps": _INT, "target_loss": _optional_float,
}
EXPERIMENT_KEYS = {"name": _STR, "repeats": _INT, "seed": _INT, "trace_every": _INT}


@dataclass(frozen=True)
class TaskSpec:
    kind: str = "tfim"
    num_qubits: int = 4
    num_blocks: int = 10
    edges: tuple | None = None
    num_vertices: int | None = None
    num_edges: int | None = None
    graph_seed: int = 0
    depth: int = 40
    data_source: str = "synthetic"
    data_dir: str | None = None
    num_train: int = 200
    num_validation: int = 200
    data_seed: int = 0
    margin: float = 0.1
    teacher_blocks: int = 1
    epochs: int | None = None

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"task kind must be one of {TASK_KINDS}, got {self.kind!r}")
        if self.kind == "maxcut" and self.edges is None and (self.num_vertices is None or self.num_edges is None):
            raise ValueError("maxcut needs either edges or num_vertices and num_edges")
        if self.kind == "classifier" and self.data_source not in ("synthetic", "mnist", "csv"):
            raise ValueError(f"unknown data source {self.data_source!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    task: TaskSpec = field(default_factory=TaskSpec)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    l2: float = 0.0
    name: str = "experiment"
    repeats: int = 1
    seed: int = 0
    trace_every: int = 1

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.trace_every < 1:
            raise ValueError("trace_every must be at least 1")
        if self.l2 < 0:
            raise ValueError("l2 strength must be non-negative")
        if self.task.kind != "classifier" and self.estimator.batch_size != 1:
            raise ValueError("batch_size applies to the classifier task only")

    def with_seed(self, seed: int) -> ExperimentSpec:
        return replace(self, seed=seed)


def _section(parser: configparser.ConfigParser, name: str, keys: dict, required: bool = True) -> dict:
    if not parser.has_section(name):
        if required:
            raise ValueError(f"spec is missing the [{name}] section")
        return {}
    out = {}
    for key, raw in parser.items(name):
        if key not in keys:
            raise ValueError(f"unknown key {key!r} in [{name}]")
        try:
            out[key] = keys[key](raw)
        except (ValueError, TypeError) as exc:
            raise ValueError(f"bad value for {name}.{key}: {raw!r} ({exc})") from None
    return out


def parse_spec(text: str) -> ExperimentSpec:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string(text)
    unknown = set(parser.sections()) - {"task", "estimator", "optimizer", "experiment"}
    if unknown:
        raise ValueError(f"unknown sections {sorted(unknown)}")
    task = TaskSpec(**_section(parser, "task", TASK_KEYS))
    est = _section(parser, "estimator", ESTIMATOR_KEYS)
    l2 = est.pop("l2", 0.0)
    estimator = EstimatorConfig(**est)
    optimizer = OptimizerConfig(**_section(parser, "optimizer", OPTIMIZER_KEYS))
    exp = _section(parser, "experiment", EXPERIMENT_KEYS, required=False)
    return ExperimentSpec(task, estimator, optimizer, l2, **exp)


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    spec = parse_spec(path.read_text())
    if spec.name == "experiment":
        spec = replace(spec, name=path.stem)
    return spec


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return " ".join(f"{a}-{b}" for a, b in value)
    return str(value)


def dump_spec(spec: ExperimentSpec) -> str:
    """INI text that :func:`parse_spec` maps back to ``spec``."""
    lines = ["[task]"]
    lines += [f"{f.name} = {_fmt(getattr(spec.task, f.name))}" for f in fields(TaskSpec)
              if getattr(spec.task, f.name) is not None]
    lines += ["", "[estimator]"]
    for f in fields(EstimatorConfig):
        val = getattr(spec.estimator, f.name)
        lines.append(f"{f.name} = {'exact' if f.name == 'shots' and val is None else val}")
    lines.append(f"l2 = {spec.l2}")
    lines += ["", "[optimizer]"]
    lines += [f"{f.name} = {_fmt(getattr(spec.optimizer, f.name))}" for f in fields(OptimizerConfig)]
    lines += ["", "[experiment]", f"name = {spec.name}", f"repeats = {spec.repeats}", f"seed = {spec.seed}",
              f"trace_every = {spec.trace_every}"]
    return "\n".join(lines) + "\n"
