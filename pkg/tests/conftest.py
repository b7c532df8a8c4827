import pytest


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path_factory, monkeypatch):
    """Point the ground-truth cache at a session-local directory."""
    cache = tmp_path_factory.getbasetemp() / "dgsm-cache"
    cache.mkdir(exist_ok=True)
    monkeypatch.setenv("DGSM_LAB_CACHE", str(cache))
    yield
