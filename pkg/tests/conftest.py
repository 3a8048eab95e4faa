"""Shared fixtures: the scalar benchmark model and derived objects."""

import numpy as np
import pytest

import acksiege as ak


@pytest.fixture(scope="session")
def scalar_model():
    """Scalar benchmark system used throughout the suite."""
    return ak.SystemModel(A=1.2, C=0.7, Q=0.8, R=0.8, Pi0=0.8, lam=0.5)


@pytest.fixture(scope="session")
def ss(scalar_model):
    return ak.steady_state_cov(scalar_model)


@pytest.fixture(scope="session")
def em():
    """Energy budget delta_high=10, delta_low=3, psi=4, so (p, q) = (1, 7)."""
    return ak.reduce_energy_budget(10, 3, 4)


@pytest.fixture(scope="session")
def two_dim_model():
    """A small two-dimensional system with one unstable mode."""
    return ak.SystemModel(
        A=np.array([[1.1, 0.2], [0.0, 0.7]]),
        C=np.array([[1.0, 0.0]]),
        Q=np.array([[0.6, 0.1], [0.1, 0.4]]),
        R=np.array([[0.5]]),
        Pi0=np.eye(2),
        lam=0.6,
    )
