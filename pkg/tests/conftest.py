import numpy as np
import pytest

from fuselite.dataio import build_manifest
from fuselite.synthetic import write_toy_dataset


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory):
    """Small synthetic dataset: 6 scenes of 2 exposures at 160x120."""
    root = tmp_path_factory.mktemp("toydata")
    write_toy_dataset(root, n_scenes=6, size=(160, 120), n_exposures=2, seed=77)
    return root


@pytest.fixture(scope="session")
def toy_manifest(toy_root, tmp_path_factory):
    path = tmp_path_factory.mktemp("manifests") / "manifest.jsonl"
    build_manifest(toy_root, path, size=None)
    return path


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
