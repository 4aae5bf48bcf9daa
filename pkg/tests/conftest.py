import numpy as np
import pytest
from PIL import Image
from skimage import data as skdata

from blindsr.imgproc import split_luma_chroma

# (image, top, left) windows of scikit-image sample pictures used as
# ground truth; fixed once and reused by every end-to-end test
CROPS = [
    ("camera", 100, 200),
    ("astronaut", 30, 180),
    ("coffee", 100, 300),
    ("chelsea", 50, 150),
    ("rocket", 150, 250),
]


def natural_crop(name, top, left, n=128):
    img = getattr(skdata, name)()
    img = split_luma_chroma(img / 255.0)[0] if img.ndim == 3 else img / 255.0
    return np.ascontiguousarray(img[top:top + n, left:left + n])


def save_gray(path, img):
    Image.fromarray(np.round(np.clip(img, 0, 1) * 255).astype(np.uint8)).save(path)


@pytest.fixture(scope="session")
def camera128():
    return natural_crop(*CROPS[0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
