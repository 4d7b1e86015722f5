from __future__ import annotations

import gzip
import itertools
import struct

import numpy as np
import pytest

from dsgd.rng import RngStream
from dsgd.simcore import PauliObservable
from dsgd.tasks import (ClassifierTask, Dataset, DataSplit, build_maxcut, build_tfim, downsample_images,
                        ground_energy, linear_interpolation_init, load_classification_data, load_mnist,
                        make_synthetic_data, maxcut_hamiltonian, random_maxcut_instance, read_dataset_csv, read_idx,
                        tfim_hamiltonian, validation_accuracy, write_dataset_csv)
from dsgd.tasks.common import sparse_matrix


def write_idx(path, array: np.ndarray, compress=False):
    magic = 0x803 if array.ndim == 3 else 0x801
    head = struct.pack(">I", magic) + b"".join(struct.pack(">I", s) for s in array.shape)
    data = head + array.astype(np.uint8).tobytes()
    opener = gzip.open if compress else open
    with opener(path, "wb") as fh:
        fh.write(data)


# -- TFIM -------------------------------------------------------------------------------


def test_tfim_two_qubit_ground_energy():
    assert ground_energy(tfim_hamiltonian(2), 2) == pytest.approx(-np.sqrt(5), abs=1e-12)


def test_tfim_energy_on_all_zeros_state():
    # one ZZ bond contributes +1; X terms vanish on a computational basis state
    H = tfim_hamiltonian(2)
    psi = np.array([1.0, 0, 0, 0])
    assert float(psi @ H.to_matrix(2).real @ psi) == pytest.approx(1.0)


def test_tfim_task():
    task = build_tfim(4, 10)
    assert task.num_params == 40
    assert len(task.hamiltonian) == 7
    assert task.ground_energy == pytest.approx(np.linalg.eigvalsh(task.hamiltonian.to_matrix(4))[0])
    theta = task.initial_theta(RngStream(3))
    assert theta.shape == (40,) and theta.min() >= 0 and theta.max() < 2 * np.pi
    np.testing.assert_array_equal(theta, task.initial_theta(RngStream(3)))
    assert task.loss(theta) >= task.ground_energy
    sampled = [task.evaluate_loss(theta, 10_000, RngStream(i)) for i in range(20)]
    assert abs(np.mean(sampled) - task.loss(theta)) < 5 * np.std(sampled) / np.sqrt(20) + 1e-9
    with pytest.raises(ValueError):
        task.evaluate_loss(theta, 0, RngStream(0))
    with pytest.raises(ValueError):
        tfim_hamiltonian(1)


def test_sparse_matrix_matches_dense(rng):
    H = PauliObservable([(0.3, "X0 Y2"), (-1.0, "Z1"), (0.5, "Y0 Y1 Z2")])
    np.testing.assert_allclose(sparse_matrix(H, 3).toarray(), H.to_matrix(3), atol=1e-12)


# -- MaxCut -----------------------------------------------------------------------------


def test_triangle_maxcut():
    task = build_maxcut([(0, 1), (1, 2), (0, 2)], 2)
    assert task.ground_energy == -1.0
    assert task.max_cut == 2
    assert task.normalize(task.ground_energy) == 0.0
    assert task.normalize(3.0) == pytest.approx(4.0)


def test_maxcut_ground_energy_by_enumeration():
    edges = random_maxcut_instance(6, 9, RngStream(4))
    best = max(sum((z >> a & 1) != (z >> b & 1) for a, b in edges) for z in range(64))
    task = build_maxcut(edges, 4)
    assert task.max_cut == best
    assert task.ground_energy == len(edges) - 2 * best


def test_random_instance_properties():
    edges = random_maxcut_instance(6, 9, RngStream(1))
    assert len(edges) == len(set(edges)) == 9
    assert all(a < b < 6 for a, b in edges)
    assert edges == random_maxcut_instance(6, 9, RngStream(1))
    with pytest.raises(ValueError):
        random_maxcut_instance(3, 4, 0)


def test_maxcut_validation():
    with pytest.raises(ValueError):
        maxcut_hamiltonian([(0, 0)])
    with pytest.raises(ValueError):
        maxcut_hamiltonian([(0, 1), (1, 0)])
    with pytest.raises(ValueError):
        build_maxcut([(0, 1)], 3)
    with pytest.raises(ValueError):
        build_maxcut([(0, 5)], 2, num_vertices=3)


def test_linear_interpolation_init():
    np.testing.assert_allclose(linear_interpolation_init(4), [0.25, 0.5, 0.75, 0.0])


def test_normalized_cost_in_range(rng):
    edges = random_maxcut_instance(5, 6, RngStream(2))
    task = build_maxcut(edges, 4)
    # energies lie in [E_ground, |E|], the all-uncut assignment
    upper = task.normalize(float(len(edges)))
    for _ in range(20):
        c = task.normalized_cost(rng.uniform(0, 2 * np.pi, 4))
        assert -1e-12 <= c <= upper + 1e-12


# -- classifier -------------------------------------------------------------------------


def test_synthetic_data_is_balanced_and_separable():
    split = make_synthetic_data(2, 100, 60, seed=5)
    assert len(split.train) == 100 and len(split.validation) == 60
    labels = np.concatenate([split.train.labels, split.validation.labels])
    assert labels.sum() == 0
    np.testing.assert_allclose(np.linalg.norm(split.train.features, axis=1), 1.0)
    again = make_synthetic_data(2, 100, 60, seed=5)
    np.testing.assert_array_equal(again.train.features, split.train.features)


def test_teacher_parameters_classify_perfectly():
    split = make_synthetic_data(2, 50, 50, seed=9)
    task = ClassifierTask(2, 1, split)
    teacher = RngStream(9, ("synthetic",)).child("teacher").generator().uniform(0, 2 * np.pi, task.num_params)
    assert validation_accuracy(task, teacher) == 1.0
    assert task.accuracy(teacher, "train") == 1.0


def test_untrained_accuracy_near_chance():
    split = make_synthetic_data(2, 10, 400, seed=1)
    task = ClassifierTask(2, 1, split)
    accs = [task.accuracy(task.initial_theta(RngStream(s))) for s in range(40)]
    # each accuracy averages 400 balanced labels; the ensemble mean should sit near 1/2
    assert abs(np.mean(accs) - 0.5) < 0.15


def test_classifier_loss_and_sampled_loss():
    split = make_synthetic_data(2, 40, 20, seed=2)
    task = ClassifierTask(2, 1, split)
    theta = task.initial_theta(0)
    ev = task.expectations(theta, "train")
    assert task.loss(theta) == pytest.approx(np.mean((ev - split.train.labels) ** 2))
    draws = [task.evaluate_loss(theta, 50, RngStream(i)) for i in range(200)]
    assert np.mean(draws) > 0
    with pytest.raises(ValueError):
        task.split("test")


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.array([[1.0, 0.0]]), np.array([0.0]))
    with pytest.raises(ValueError):
        Dataset(np.array([[1.0, 1.0]]), np.array([1.0]))
    ds = Dataset(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1.0, -1.0]))
    np.testing.assert_array_equal(ds.flipped().labels, [-1, 1])
    assert len(ds.subset([1])) == 1
    with pytest.raises(ValueError):
        ClassifierTask(3, 1, DataSplit(ds, ds))


def test_idx_round_trip(tmp_path):
    imgs = np.arange(2 * 28 * 28).reshape(2, 28, 28) % 251
    write_idx(tmp_path / "imgs", imgs)
    write_idx(tmp_path / "labs.gz", np.array([3, 6]), compress=True)
    np.testing.assert_array_equal(read_idx(tmp_path / "imgs"), imgs)
    np.testing.assert_array_equal(read_idx(tmp_path / "labs.gz"), [3, 6])
    (tmp_path / "bad").write_bytes(struct.pack(">II", 0x1234, 0))
    with pytest.raises(ValueError, match="magic"):
        read_idx(tmp_path / "bad")
    (tmp_path / "short").write_bytes(struct.pack(">II", 0x801, 5) + b"\x01")
    with pytest.raises(ValueError):
        read_idx(tmp_path / "short")


def test_downsampling_picks_cropped_strided_pixels():
    img = np.zeros((1, 28, 28))
    img[0, 6, 6] = 3.0
    img[0, 8, 10] = 4.0
    img[0, 7, 7] = 100.0  # odd offset inside the crop: dropped
    img[0, 2, 2] = 100.0  # border: dropped
    out = downsample_images(img)
    assert out.shape == (1, 64)
    expected = np.zeros(64)
    expected[0] = 0.6
    expected[1 * 8 + 2] = 0.8
    np.testing.assert_allclose(out[0], expected)
    with pytest.raises(ValueError):
        downsample_images(np.zeros((1, 28, 28)))


def test_load_mnist_from_idx_files(tmp_path, rng):
    labels = np.array([3, 6, 1] * 6)
    imgs = rng.integers(1, 255, size=(labels.size, 28, 28))
    write_idx(tmp_path / "train-images-idx3-ubyte.gz", imgs, compress=True)
    write_idx(tmp_path / "train-labels-idx1-ubyte", labels)
    split = load_mnist(tmp_path, num_train_per_class=4, num_validation_per_class=2)
    assert split.train.features.shape == (8, 64)
    np.testing.assert_array_equal(split.train.labels, [1] * 4 + [-1] * 4)
    threes = np.flatnonzero(labels == 3)
    np.testing.assert_allclose(split.train.features[0], downsample_images(imgs[threes[:1]])[0])
    np.testing.assert_allclose(split.validation.features[0], downsample_images(imgs[threes[4:5]])[0])
    with pytest.raises(ValueError):
        load_mnist(tmp_path, num_train_per_class=10, num_validation_per_class=2)
    with pytest.raises(FileNotFoundError):
        load_mnist(tmp_path / "missing")


def test_csv_cache_round_trip(tmp_path):
    split = make_synthetic_data(2, 12, 6, seed=3)
    write_dataset_csv(split.train, tmp_path / "train.csv")
    write_dataset_csv(split.validation, tmp_path / "validation.csv")
    back = read_dataset_csv(tmp_path / "train.csv")
    np.testing.assert_array_equal(back.features, split.train.features)
    np.testing.assert_array_equal(back.labels, split.train.labels)
    loaded = load_classification_data("csv", directory=tmp_path)
    assert len(loaded.validation) == 6
    with pytest.raises(ValueError):
        load_classification_data("imagenet")


def test_enumeration_helper_agrees_with_itertools():
    # the brute-force cut counter above relies on bit extraction; cross-check once
    edges = [(0, 1), (1, 2)]
    cuts = [sum(bits[a] != bits[b] for a, b in edges) for bits in itertools.product([0, 1], repeat=3)]
    assert max(cuts) == 2
