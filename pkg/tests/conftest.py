import numpy as np
import pytest

from polarmem.channels import gilbert_elliott


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def gilbert_channel():
    return gilbert_elliott(0.0, 0.9, 0.01, 0.05)


@pytest.fixture
def channel_file(tmp_path):
    def _write(name: str, text: str):
        path = tmp_path / name
        path.write_text(text)
        return path

    return _write
