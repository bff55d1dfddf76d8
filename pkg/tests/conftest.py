import pytest

from rfagent import knowledge
from rfagent.scpi.client import ScpiSession
from rfagent.scpi.simulator import SimulatorConfig, serve


@pytest.fixture(scope="session")
def kb():
    return knowledge.builtin()


@pytest.fixture
def sim():
    """Fresh simulator with the default through line, torn down after."""
    handle = serve(SimulatorConfig())
    yield handle
    handle.stop()


@pytest.fixture
def sim_session(sim):
    session = ScpiSession(sim.host, sim.port, timeout_s=5.0)
    yield session
    session.close()
