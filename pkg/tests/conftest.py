import pytest

from spinxfer.io import data_path, load_published_values, read_phi_table
from spinxfer.transfer import TransferModel


@pytest.fixture(scope="session")
def model42():
    return TransferModel.default()


@pytest.fixture(scope="session")
def published_values():
    return load_published_values()


@pytest.fixture(scope="session")
def table_phi(published_values):
    """Published angle rows keyed by operation name."""
    return {name: read_phi_table(data_path(row["phi_file"]))
            for name, row in published_values["rows"].items() if row.get("phi_file")}
