import pytest

from rapidrisk.dataset import Dataset

from .samples import data as samples


@pytest.fixture
def mapped_pair():
    data = samples.mapped_data(60)
    return data, data


@pytest.fixture
def toy_categorical():
    return samples.toy_categorical_inputs()


@pytest.fixture
def constant_qi_data() -> Dataset:
    return samples.constant_qi_data(60)


def pytest_addoption(parser):  # type: ignore
    parser.addoption(  # type: ignore
        "--slow",
        action="store_true",
        default=False,
        help=(
            "Run the simulation-scale tests (kappa sweeps, large forests), which "
            "take minutes rather than seconds."
        ),
    )


def pytest_configure(config):  # type: ignore
    config.addinivalue_line(  # type: ignore
        "markers", "slow: mark test as a simulation-scale run needing --slow."
    )


def pytest_collection_modifyitems(config, items):  # type: ignore
    if config.getoption("--slow"):  # type: ignore
        return
    skip_tests = pytest.mark.skip(reason="need --slow option to run")
    for item in items:  # type: ignore
        if "slow" in item.keywords:  # type: ignore
            item.add_marker(skip_tests)  # type: ignore
