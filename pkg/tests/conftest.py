import os

# Keep BLAS single-threaded before numpy loads anywhere: tiny-matrix
# workloads run faster and timings stay comparable.
for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

import pytest

from pssp.augment import augment_records
from pssp.synthetic import synthetic_corpus, write_synthetic_corpus


@pytest.fixture(scope="session")
def corpus_records():
    """The full 513-record synthetic stand-in corpus."""
    return synthetic_corpus()


@pytest.fixture(scope="session")
def corpus_windows(corpus_records):
    """Default-parameter augmentation of the full corpus (window 15, stride 1)."""
    return augment_records(corpus_records)


@pytest.fixture(scope="session")
def corpus_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "corpus.cb3"
    write_synthetic_corpus(path)
    return path


@pytest.fixture(scope="session")
def small_corpus_path(tmp_path_factory):
    """A 30-record corpus for CLI and pipeline smoke tests."""
    path = tmp_path_factory.mktemp("data") / "small.cb3"
    write_synthetic_corpus(path, seed=13, n_records=30, total_residues=3600)
    return path
