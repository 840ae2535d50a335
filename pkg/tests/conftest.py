import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import cyclonet as cn
from cyclonet.cli import load_spec

BENCH_SEED = 20260808
BENCH_N = 628400


@pytest.fixture(scope="session")
def bench11():
    return load_spec("builtin:bench11")


@pytest.fixture(scope="session")
def bench11_hidden(bench11):
    return cn.NetworkSpec(bench11.node_ids, bench11.edge_filters,
                          bench11.input_specs, frozenset({10, 11}))


@pytest.fixture(scope="session")
def bench11_truth(bench11):
    return cn.topology_of(bench11.generative_graph())


@pytest.fixture(scope="session")
def bench11_dataset(bench11):
    """The full-size benchmark dataset, simulated once per session."""
    return cn.simulate(bench11, BENCH_N, seed=BENCH_SEED, full_output=True)


@pytest.fixture(scope="session")
def oracle_grid(bench11):
    om = 2 * np.pi * np.arange(128) / 128
    return cn.exact_inverse_psd(bench11, om)


@pytest.fixture(scope="session")
def oracle_oo_grid(bench11_hidden):
    om = 2 * np.pi * np.arange(128) / 128
    return cn.exact_observed_inverse_psd(bench11_hidden, om)


CHAIN_ORDER = [1, 2, 3, 10, 4, 5, 6, 11, 7, 8, 9]
TRUE_EDGES = sorted(
    tuple(sorted((CHAIN_ORDER[k], CHAIN_ORDER[k + 1])))
    for k in range(len(CHAIN_ORDER) - 1))
SPOUSE_EDGES = sorted(
    tuple(sorted((CHAIN_ORDER[k], CHAIN_ORDER[k + 2])))
    for k in range(len(CHAIN_ORDER) - 2))
