import pytest

from ibgraph.autodiff import Tape


@pytest.fixture(autouse=True)
def fresh_tape():
    """Isolate every test on its own recording tape."""
    with Tape():
        yield
