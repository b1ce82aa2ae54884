import pytest

from dshelpers import build_tiny_dataset


@pytest.fixture(scope="session")
def tiny_manifest(tmp_path_factory):
    out = tmp_path_factory.mktemp("tinyds")
    return build_tiny_dataset(str(out))
