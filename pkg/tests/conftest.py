import numpy as np
import pytest

from lad2d import ComponentParams, Grid, ModelParams


@pytest.fixture
def one_component_truth() -> ModelParams:
    """Single-component benchmark parameters used throughout the suite."""
    return ModelParams((ComponentParams(2.4, 1.4, 0.4, 0.6),))


@pytest.fixture
def two_component_truth() -> ModelParams:
    """Two-component benchmark parameters used throughout the suite."""
    return ModelParams(
        (
            ComponentParams(4.2, 3.6, 1.1, 1.9),
            ComponentParams(3.3, 2.7, 0.24, 0.36),
        )
    )


def random_model(rng: np.random.Generator, p: int, amp_scale: float = 3.0) -> ModelParams:
    """Random parameters with frequencies kept away from the interval ends."""
    comps = []
    while len(comps) < p:
        comp = ComponentParams(
            A=float(rng.uniform(-amp_scale, amp_scale)),
            B=float(rng.uniform(-amp_scale, amp_scale)),
            lam=float(rng.uniform(0.05, np.pi - 0.05)),
            mu=float(rng.uniform(0.05, np.pi - 0.05)),
        )
        if all((c.lam, c.mu) != (comp.lam, comp.mu) for c in comps):
            comps.append(comp)
    return ModelParams(tuple(comps))


def random_field(rng: np.random.Generator, T: int, S: int):
    from lad2d import SignalField

    return SignalField(Grid(T, S), rng.normal(size=(T, S)))
