import numpy as np
import pytest

from ctseg.geometry import Contour, resample_uniform


@pytest.fixture
def unit_square():
    return np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def random_blob(rng, n=50, center=(50.0, 50.0), radius=15.0, wobble=0.25):
    """Smooth random closed shape for property tests."""
    t = np.linspace(0, 2 * np.pi, 4 * n, endpoint=False)
    r = radius * (1.0
                  + wobble * rng.uniform(-1, 1) * np.cos(t + rng.uniform(0, 2 * np.pi))
                  + 0.5 * wobble * rng.uniform(-1, 1) * np.cos(2 * t + rng.uniform(0, 2 * np.pi)))
    pts = np.stack([center[0] + r * np.cos(t), center[1] + r * np.sin(t)], axis=1)
    return resample_uniform(pts, n)
