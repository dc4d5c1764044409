import numpy as np
import pytest

from exchange_mcmc import exact_analysis as ea
from exchange_mcmc import kernels as kn
from exchange_mcmc import models as md

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture
def two_point():
    model, prior, x = md.make_two_point_bernoulli()
    post = md.PosteriorSpec(model, prior, x)
    prop = kn.grid_matrix_proposal(np.array([0.25, 0.75]), SWAP, "swap")
    return post, prop


@pytest.fixture(scope="session")
def beta_binomial_grid():
    """n=10 Binomial, Beta(2, 3) truncated to [0.2, 0.8], x=4, 21-point grid."""
    model, prior = md.make_beta_binomial(10, 0.2, 0.8, 2.0, 3.0)
    post = ea.discretize_posterior(md.PosteriorSpec(model, prior, 4), K=21, interval=(0.2, 0.8))
    prop = kn.grid_uniform(np.linspace(0.2, 0.8, 21))
    return post, prop


@pytest.fixture(scope="session")
def ising_n2_grid():
    grid = np.linspace(-2.0, 2.0, 20)
    prior = md.discrete_prior(grid, np.ones(20))
    model = md.make_ising([[0, 1, 1.0]])
    post = md.PosteriorSpec(model, prior, np.array([1, 1], dtype=np.int8))
    return post, kn.grid_random_walk(grid, 2)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
