import numpy as np
import pytest

from edgegaze.recording import load_index
from edgegaze.synth import gen_dataset


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Three short recordings shared by service/bench/CLI tests."""
    root = tmp_path_factory.mktemp("smallds")
    gen_dataset(root, 3, seed=11, fps=5.0, duration_s=4.0)
    return root


@pytest.fixture(scope="session")
def small_recordings(small_dataset):
    return load_index(small_dataset / "index.json")


@pytest.fixture(scope="session")
def tiny_model():
    from edgegaze import nn

    return nn.build_named_model("cnn_tiny", seed=3)


@pytest.fixture(scope="session")
def tiny_gru_model():
    from edgegaze import nn

    return nn.build_named_model("cnn_gru_tiny", seed=3)
