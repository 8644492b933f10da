import logging
from pathlib import Path

import pytest

from app.services.orchestrator import calibrate
from app.utils.test_data import WORKED_ANCHOR, create_worked_fleet
from main import HANDLER_NAME

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope='session')
def scenarios_dir():
    return ROOT / 'scenarios'


@pytest.fixture(scope='session')
def worked_scale():
    """K of tau = K * d^4, back-solved from K1 observing C1"""
    return calibrate(*WORKED_ANCHOR)


@pytest.fixture
def worked_fleet(worked_scale):
    return create_worked_fleet(worked_scale)


@pytest.fixture(autouse=True)
def detach_cli_handlers():
    """main() attaches handlers bound to the captured stderr; drop them after each test"""
    yield
    root = logging.getLogger()
    for handler in [h for h in root.handlers if h.get_name() == HANDLER_NAME]:
        root.removeHandler(handler)
        handler.close()
