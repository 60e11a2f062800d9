import numpy as np
import pytest
from loguru import logger

import kwsfcm.models.config
from kwsfcm.models.config import Config
from kwsfcm.models.image import GrayImage, SegmentationMap, save_image


@pytest.fixture(autouse=True)
def setup_config(tmp_path, monkeypatch):
    """Set up test CONFIG before each test using tmp_path."""
    # Prevent host env vars from leaking into tests
    monkeypatch.delenv("KWSFCM_HOME", raising=False)
    monkeypatch.delenv("KWSFCM_THREADS", raising=False)

    config = Config(home=tmp_path / "home", threads=2)
    kwsfcm.models.config.CONFIG = config
    config.logs_dir.mkdir(parents=True, exist_ok=True)

    yield config

    kwsfcm.models.config.CONFIG = None


@pytest.fixture(autouse=True)
def disable_file_logging(monkeypatch):
    """Prevent logger.add() from creating file handlers during tests."""
    original_add = logger.add

    def mock_add(sink, **kwargs):
        # Block file path sinks to prevent log files during tests
        if hasattr(sink, "__fspath__") or isinstance(sink, (str, bytes)):
            return None
        return original_add(sink, **kwargs)

    monkeypatch.setattr(logger, "add", mock_add)
    yield


def make_two_region(width: int = 100, height: int = 100, low: int = 60, high: int = 180) -> GrayImage:
    """Left half `low`, right half `high`."""
    pixels = np.full((height, width), low, dtype=np.uint8)
    pixels[:, width // 2 :] = high
    return GrayImage(pixels)


def make_step(width: int = 64, height: int = 64) -> GrayImage:
    """Hard vertical 0|255 step."""
    return make_two_region(width, height, 0, 255)


@pytest.fixture
def two_region() -> GrayImage:
    return make_two_region()


@pytest.fixture
def small_two_region() -> GrayImage:
    return make_two_region(24, 16)


@pytest.fixture
def two_region_truth() -> SegmentationMap:
    labels = np.zeros((100, 100), dtype=np.intp)
    labels[:, 50:] = 1
    return SegmentationMap(labels, 2)


@pytest.fixture
def pgm_file(tmp_path, small_two_region):
    """A small two-region image saved as PGM."""
    path = tmp_path / "input.pgm"
    save_image(path, small_two_region)
    return path


@pytest.fixture(scope="session")
def region_factory():
    """Builds two-region images of any size and levels."""
    return make_two_region
