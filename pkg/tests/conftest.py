from __future__ import annotations

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from roodbench.volume import LabelVolume, Volume, save_label, save_volume  # noqa: E402


def blob(shape=(24, 24, 24), spacing=(1.0, 1.0, 1.0), seed=0, noise=1.0):
    """Smooth bright blob plus noise, and a ball-shaped mask at its core."""
    rng = np.random.default_rng(seed)
    grid = np.indices(shape).astype(float)
    centre = (np.array(shape) - 1) / 2.0
    r2 = sum(((grid[i] - centre[i]) * spacing[i]) ** 2 for i in range(3))
    extent = min(n * s for n, s in zip(shape, spacing))
    img = 100.0 * np.exp(-r2 / (2 * (extent / 5) ** 2)) + rng.normal(0, noise, shape) + 10.0
    label = r2 < (extent / 5) ** 2
    return Volume(img, spacing), LabelVolume(label, spacing)


def write_pairs(directory, n=2, shape=(24, 24, 24), spacing=(1.0, 1.0, 1.0), compress=True):
    os.makedirs(directory, exist_ok=True)
    ext = ".nii.gz" if compress else ".nii"
    ids = []
    for i in range(n):
        img, lab = blob(shape, spacing, seed=i)
        sid = f"case_{i:02d}"
        save_volume(img, os.path.join(directory, sid + ext))
        save_label(lab, os.path.join(directory, sid + "_label" + ext))
        ids.append(sid)
    return ids


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def blob_pair():
    return blob()


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
