"""Binary classification with an amplitude encoder, a sigma-block circuit and a Z readout.

Data come either from local MNIST IDX files (3 vs 6, cropped and strided to
8x8) or from a seeded synthetic generator whose labels are produced by a
randomly drawn teacher circuit of the same architecture, so a perfect
classifier always exists.
"""
from __future__ import annotations

import csv
import gzip
import os
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from ..circuits import EncodingCircuit, build_sigma_block_ansatz
from ..gradients import ShiftRule, derive_shift_rule
from ..rng import RngStream, as_stream
from ..simcore import kernels
from ..simcore.pauli import PauliObservable
from ..simcore.statevector import sample_from_expectation

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
CROP = 6
STRIDE = 2
POSITIVE_DIGIT, NEGATIVE_DIGIT = 3, 6
DATA_DIR_ENV = "DSGD_DATA_DIR"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Unit-norm feature rows with labels in {-1, +1}."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if x.ndim != 2 or y.shape != (x.shape[0],):
            raise ValueError("features must be (S, D) and labels (S,)")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if x.shape[0] and np.any(np.abs(np.linalg.norm(x, axis=1) - 1.0) > 1e-8):
            raise ValueError("feature vectors must have unit 2-norm")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.labels.shape[0]

    def flipped(self) -> Dataset:
        return Dataset(self.features, -self.labels)

    def subset(self, idx) -> Dataset:
        return Dataset(self.features[idx], self.labels[idx])


@dataclass(frozen=True, eq=False)
class DataSplit:
    train: Dataset
    validation: Dataset


# -- task -------------------------------------------------------------------------------


def readout_observable(qubit: int = 0) -> PauliObservable:
    return PauliObservable([(1.0, f"Z{qubit}")])


def predict_from_expectation(values) -> np.ndarray:
    """+1 where ``<Z> >= 0``, else -1."""
    return np.where(np.asarray(values) >= 0, 1.0, -1.0)


@dataclass(eq=False)
class ClassifierTask:
    num_qubits: int
    num_blocks: int
    data: DataSplit
    readout_qubit: int = 0
    model: EncodingCircuit = field(init=False)
    observable: PauliObservable = field(init=False)

    kind = "classifier"

    def __post_init__(self):
        dim = 1 << self.num_qubits
        for name, ds in (("train", self.data.train), ("validation", self.data.validation)):
            if len(ds) and ds.features.shape[1] != dim:
                raise ValueError(f"{name} features have length {ds.features.shape[1]}, expected {dim}")
        self.model = EncodingCircuit(build_sigma_block_ansatz(self.num_qubits, self.num_blocks))
        self.observable = readout_observable(self.readout_qubit)

    @property
    def circuit(self):
        return self.model.circuit

    @property
    def num_params(self) -> int:
        return self.circuit.num_params

    @cached_property
    def rule(self) -> ShiftRule:
        return derive_shift_rule(self.circuit)

    def split(self, name: str) -> Dataset:
        if name not in ("train", "validation"):
            raise ValueError(f"unknown split {name!r}")
        return getattr(self.data, name)

    def initial_theta(self, rng: RngStream | int) -> np.ndarray:
        return as_stream(rng).child("init").generator().uniform(0.0, 2 * np.pi, self.num_params)

    def expectations(self, theta, split: str = "validation") -> np.ndarray:
        """Exact ``<Z>`` for every instance of ``split``."""
        ds = self.split(split)
        if len(ds) == 0:
            raise ValueError(f"{split} split is empty")
        states = self.model.states(theta, ds.features)
        return kernels.term_expectations(states, self.observable.paulis, self.num_qubits) @ self.observable.coeffs

    def loss(self, theta, split: str = "train") -> float:
        ds = self.split(split)
        return float(np.mean((self.expectations(theta, split) - ds.labels) ** 2))

    def evaluate_loss(self, theta, mode="exact", rng=None, split: str = "train") -> float:
        """Mean squared residual; with a shot count, each readout is an n-shot mean."""
        if mode == "exact":
            return self.loss(theta, split)
        if isinstance(mode, (bool, np.bool_)) or not isinstance(mode, (int, np.integer)) or mode < 1:
            raise ValueError(f"mode must be 'exact' or a positive shot count, got {mode!r}")
        if rng is None:
            raise ValueError("shot-based evaluation needs an rng")
        ev = self.expectations(theta, split)
        est = sample_from_expectation(ev, int(mode), as_stream(rng).generator())
        return float(np.mean((est - self.split(split).labels) ** 2))

    def predict(self, theta, split: str = "validation") -> np.ndarray:
        return predict_from_expectation(self.expectations(theta, split))

    def accuracy(self, theta, split: str = "validation") -> float:
        return float(np.mean(self.predict(theta, split) == self.split(split).labels))


def validation_accuracy(task: ClassifierTask, theta) -> float:
    """Fraction of validation instances classified correctly with exact expectations."""
    return task.accuracy(theta, "validation")


# -- synthetic data ---------------------------------------------------------------------


def make_synthetic_data(num_qubits: int, num_train: int, num_validation: int, seed: int,
                        num_blocks: int = 1, margin: float = 0.1, readout_qubit: int = 0) -> DataSplit:
    """Random real unit vectors labelled by a random teacher circuit, balanced per class.

    Instances whose teacher readout lies within ``margin`` of zero are discarded,
    so the classes are separated by a gap in the teacher's decision function.
    """
    if not 0 <= margin < 1:
        raise ValueError("margin must lie in [0, 1)")
    stream = RngStream(seed, ("synthetic",))
    circuit = build_sigma_block_ansatz(num_qubits, num_blocks)
    teacher = EncodingCircuit(circuit)
    theta_star = stream.child("teacher").generator().uniform(0.0, 2 * np.pi, circuit.num_params)
    gen = stream.child("features").generator()
    obs = readout_observable(readout_qubit)
    need = {1.0: (num_train + num_validation + 1) // 2, -1.0: (num_train + num_validation) // 2}
    xs = {1.0: [], -1.0: []}
    dim = 1 << num_qubits
    for _ in range(1000):
        x = gen.standard_normal((512, dim))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        ev = kernels.term_expectations(teacher.states(theta_star, x), obs.paulis, num_qubits)[:, 0]
        keep = np.abs(ev) >= margin
        for label in (1.0, -1.0):
            rows = x[keep & (predict_from_expectation(ev) == label)]
            xs[label].extend(rows[: max(0, need[label] - len(xs[label]))])
        if all(len(xs[k]) >= need[k] for k in need):
            break
    else:
        raise RuntimeError("could not generate enough instances outside the margin")
    feats = np.concatenate([np.array(xs[1.0]), np.array(xs[-1.0])])
    labels = np.concatenate([np.ones(need[1.0]), -np.ones(need[-1.0])])
    order = gen.permutation(labels.shape[0])
    feats, labels = feats[order], labels[order]
    return DataSplit(Dataset(feats[:num_train], labels[:num_train]),
                     Dataset(feats[num_train:], labels[num_train:]))


# -- MNIST ------------------------------------------------------------------------------


def _open(path: Path):
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def read_idx(path) -> np.ndarray:
    """Read an IDX image (0x803) or label (0x801) file, optionally gzip-compressed."""
    path = Path(path)
    with _open(path) as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise ValueError(f"{path} is too short to be an IDX file")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic == IMAGE_MAGIC:
        count, rows, cols = struct.unpack(">III", raw[4:16])
        body, shape = raw[16:], (count, rows, cols)
    elif magic == LABEL_MAGIC:
        count = struct.unpack(">I", raw[4:8])[0]
        body, shape = raw[8:], (count,)
    else:
        raise ValueError(f"{path}: unknown IDX magic {magic:#010x}")
    expected = int(np.prod(shape))
    if len(body) != expected:
        raise ValueError(f"{path}: expected {expected} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(shape)


def downsample_images(images: np.ndarray) -> np.ndarray:
    """Crop 6 pixels from every border (28 -> 16), keep even rows/columns (16 -> 8), flatten, 2-normalize."""
    images = np.asarray(images, dtype=float)
    if images.shape[1:] != (28, 28):
        raise ValueError(f"expected 28x28 images, got {images.shape[1:]}")
    small = images[:, CROP:28 - CROP:STRIDE, CROP:28 - CROP:STRIDE].reshape(images.shape[0], -1)
    norms = np.linalg.norm(small, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("an image is blank after cropping and cannot be normalized")
    return small / norms


def _find(directory: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx"), stem.replace("-idx", ".idx") + ".gz"):
        if (directory / name).exists():
            return directory / name
    raise FileNotFoundError(f"no {stem}[.gz] in {directory}")


def data_directory(directory=None) -> Path:
    if directory is not None:
        return Path(directory)
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


def load_mnist(directory=None, num_train_per_class: int = 2000, num_validation_per_class: int = 200) -> DataSplit:
    """3s (+1) and 6s (-1) from the MNIST training files.

    The first ``num_train_per_class`` images of each digit form the training set
    and the next ``num_validation_per_class`` the validation set.
    """
    directory = data_directory(directory)
    images = read_idx(_find(directory, "train-images-idx3-ubyte"))
    labels = read_idx(_find(directory, "train-labels-idx1-ubyte"))
    if images.shape[0] != labels.shape[0]:
        raise ValueError("image and label files disagree on the number of items")
    per_class = num_train_per_class + num_validation_per_class
    parts = {}
    for digit in (POSITIVE_DIGIT, NEGATIVE_DIGIT):
        idx = np.flatnonzero(labels == digit)
        if idx.shape[0] < per_class:
            raise ValueError(f"only {idx.shape[0]} images of digit {digit}, need {per_class}")
        parts[digit] = idx[:per_class]
    feats = {d: downsample_images(images[i]) for d, i in parts.items()}

    def build(lo, hi):
        x = np.concatenate([feats[POSITIVE_DIGIT][lo:hi], feats[NEGATIVE_DIGIT][lo:hi]])
        y = np.concatenate([np.ones(hi - lo), -np.ones(hi - lo)])
        return Dataset(x, y)

    return DataSplit(build(0, num_train_per_class), build(num_train_per_class, per_class))


def write_dataset_csv(ds: Dataset, path) -> None:
    """One row per instance: features, then the label."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for x, y in zip(ds.features, ds.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


def read_dataset_csv(path) -> Dataset:
    rows = np.loadtxt(path, delimiter=",", ndmin=2)
    return Dataset(rows[:, :-1], rows[:, -1])


def load_classification_data(source: str, *, directory=None, num_qubits: int = 2, num_train: int = 400,
                             num_validation: int = 200, seed: int = 0, teacher_blocks: int = 1,
                             margin: float = 0.1, num_train_per_class: int = 2000,
                             num_validation_per_class: int = 200) -> DataSplit:
    """``source`` is ``"synthetic"``, ``"mnist"`` (IDX files) or ``"csv"`` (a prepared cache)."""
    if source == "synthetic":
        return make_synthetic_data(num_qubits, num_train, num_validation, seed, teacher_blocks, margin)
    if source == "mnist":
        return load_mnist(directory, num_train_per_class, num_validation_per_class)
    if source == "csv":
        d = data_directory(directory)
        return DataSplit(read_dataset_csv(d / "train.csv"), read_dataset_csv(d / "validation.csv"))
    raise ValueError(f"unknown data source {source!r}")
