import time

import numpy as np
import pytest

from spicl.experiment import demo_config, lambda_sweep, run_scenario


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    """Touch the compiled path once so JIT time never lands in a timed test."""
    run_scenario(demo_config(t_final=0.3))


@pytest.fixture(scope="session")
def demo_run():
    """Full-horizon run of the default scenario, with its wall time."""
    res = run_scenario(demo_config())
    return res


@pytest.fixture(scope="session")
def demo_sweep():
    """The default 8-level sparsity sweep; returns (report, wall_seconds)."""
    t0 = time.perf_counter()
    report = lambda_sweep(demo_config(), workers=2)
    return report, time.perf_counter() - t0


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
