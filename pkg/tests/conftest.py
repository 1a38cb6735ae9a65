import pathlib

import pytest


def repo_root() -> pathlib.Path:
    return pathlib.Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def root() -> pathlib.Path:
    return repo_root()


@pytest.fixture(scope="session")
def catalog(root):
    # read-only across tests; fetch never mutates loaded tables
    from copilot.sources import default_catalog

    return default_catalog(root)
