"""Shared fixtures: a generated world, its records and a small toy model."""

import numpy as np
import pytest

from src.envgen import WorldSpec, generate_dataset, generate_world
from src.irm import TrainConfig
from src.model import ModelDims, PromptVec, init_model
from src.risks import TripletBatch


@pytest.fixture(scope="session")
def world():
    return generate_world(WorldSpec(seed=7))


@pytest.fixture(scope="session")
def records(world):
    return generate_dataset(world, 40)


@pytest.fixture(scope="session")
def dims(world):
    return ModelDims(d_img=world.spec.d_img, d_txt=world.spec.d_txt, d_h=8, V=world.spec.V)


@pytest.fixture
def model(dims):
    return init_model(dims, 0)


@pytest.fixture
def fast_cfg():
    """Few steps and few draws; enough for plumbing tests."""
    return TrainConfig(optimizer="adam", lr_primal=0.05, n_omega=3, max_steps=4)


@pytest.fixture
def tiny():
    """A 3/3/4/3 model with a two-prompt batch per split."""
    rng = np.random.default_rng(11)
    dims = ModelDims(d_img=3, d_txt=3, d_h=4, V=3, logit_scale=1.0)

    def prompt():
        return PromptVec(rng.normal(size=3), rng.normal(size=3), int(rng.integers(3)))

    batch = TripletBatch.from_prompts([prompt(), prompt()], [prompt(), prompt()], [prompt(), prompt()])
    return init_model(dims, 5), batch
