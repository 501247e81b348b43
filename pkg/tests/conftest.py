import numpy as np
import pytest
import torch

from avsal.synthetic import SyntheticSpec, make_synthetic_archive


@pytest.fixture(scope="session", autouse=True)
def single_thread():
    torch.set_num_threads(1)


@pytest.fixture(scope="session")
def synth_archive(tmp_path_factory):
    """Small deterministic archive: 1 video, 2 clips, 2 faces."""
    root = tmp_path_factory.mktemp("synth_archive")
    spec = SyntheticSpec(n_videos=1, frames_per_video=24, n_faces=2, seed=11)
    clips = make_synthetic_archive(root, spec)
    return root, clips


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
