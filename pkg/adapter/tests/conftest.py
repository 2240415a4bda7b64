from __future__ import annotations

import pytest

from riskadapter.service import AdapterConfig

from support_adapter import running_adapter


@pytest.fixture()
def constant_stub():
    with running_adapter(AdapterConfig(constant=0.9, port=0)) as url:
        yield url
