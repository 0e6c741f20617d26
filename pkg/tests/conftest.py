import pytest
import structlog


@pytest.fixture(autouse=True)
def _reset_structlog():
    """Restore structlog defaults so a test's captured stderr is not reused."""
    yield
    structlog.reset_defaults()
