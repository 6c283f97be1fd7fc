import numpy as np
import pytest

import flexatc as fa
from flexatc import problem as pb


def synthetic_logistic_dataset(m: int, d: int, seed: int) -> pb.Dataset:
    """Dense random features with labels from a noisy random hyperplane."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((m, d))
    plane = rng.standard_normal(d)
    margins = x @ plane + 0.3 * rng.standard_normal(m)
    labels = np.where(margins >= 0.0, 1.0, -1.0)
    indptr = np.arange(0, m * d + 1, d)
    indices = np.tile(np.arange(d), m)
    return pb.Dataset(d, labels, indptr, indices, x.reshape(-1).copy())


def correlated_logistic_dataset(m: int, d: int, seed: int) -> pb.Dataset:
    """Features driven by a few latent factors, like real tabular data;
    conditions the losses much worse than iid features."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(-1.0, 1.0, size=(m, 4))
    mix = 0.5 * rng.standard_normal((4, d))
    x = np.clip(base @ mix + 0.15 * rng.uniform(-1.0, 1.0, (m, d)), -1.0, 1.0)
    plane = rng.standard_normal(d)
    labels = np.where(x @ plane + 0.5 * rng.standard_normal(m) > 0.8, 1.0, -1.0)
    indptr = np.arange(0, m * d + 1, d)
    return pb.Dataset(d, labels, indptr, np.tile(np.arange(d), m), x.reshape(-1).copy())


def random_sparse_dataset(m: int, d: int, seed: int, density: float = 0.4) -> pb.Dataset:
    rng = np.random.default_rng(seed)
    labels = rng.choice([-1.0, 1.0], size=m)
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    for _ in range(m):
        mask = rng.random(d) < density
        cols = np.nonzero(mask)[0]
        indices.extend(cols.tolist())
        values.extend(rng.standard_normal(cols.size).tolist())
        indptr.append(len(indices))
    return pb.Dataset(d, labels, np.asarray(indptr), np.asarray(indices, dtype=int),
                      np.asarray(values))


@pytest.fixture(scope="session")
def ring4():
    return fa.metropolis_weights(fa.gen_topology("ring", 4))


@pytest.fixture(scope="session")
def ring10():
    return fa.metropolis_weights(fa.gen_topology("ring", 10))


@pytest.fixture(scope="session")
def complete3():
    return fa.metropolis_weights(fa.gen_topology("complete", 3))
