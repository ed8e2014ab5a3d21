import time

import pytest

from proxhomotopy import calibration, experiments


@pytest.fixture(scope="session")
def calib_record():
    return calibration.calibrate_constants(seeds=(0, 1))


@pytest.fixture(scope="session")
def calib_file(tmp_path_factory, calib_record):
    path = tmp_path_factory.mktemp("calib") / "constants.txt"
    calibration.save_calibration(calib_record, str(path))
    return str(path)


@pytest.fixture(scope="session")
def sparse_invariant_suite():
    """Criterion-5/7 instances: 20 seeds, noiseless and sigma=0.01."""
    config = experiments.InvariantSuiteConfig(
        seeds=tuple(range(20)), include=("sparse",)
    )
    start = time.monotonic()
    report = experiments.run_invariant_suite(config)
    elapsed = time.monotonic() - start
    return report, elapsed


@pytest.fixture(scope="session")
def lowrank_invariant_suite():
    config = experiments.InvariantSuiteConfig(
        seeds=tuple(range(20)), include=("lowrank",)
    )
    start = time.monotonic()
    report = experiments.run_invariant_suite(config)
    elapsed = time.monotonic() - start
    return report, elapsed
