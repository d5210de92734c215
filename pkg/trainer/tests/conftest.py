import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from magat_trainer.model import ModelConfig


@pytest.fixture
def tiny_cfg() -> ModelConfig:
    return ModelConfig(
        r_obs=3, r_comm=5, embed_dim=16, edge_dim=8, edge_hidden=8,
        cnn_channels=(8, 8), decoder_hidden=16,
    )
