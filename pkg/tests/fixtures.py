"""Hand-built datasets shared by several test modules."""
import numpy as np

from triwin.dataset import LabeledDataset


def _ring(centre, n, radius, phase=0.0):
    t = phase + 2 * np.pi * np.arange(n) / n
    r = radius * (1 + 0.01 * np.arange(n))   # distinct distances, no ties
    return np.c_[centre[0] + r * np.cos(t), centre[1] + r * np.sin(t)]


def neighbourhood_fixture():
    """Two negatives with engineered 11-neighbourhoods.

    Row 0 sees 9 negatives and 2 positives; row 12 sees 6 negatives and
    5 positives.  The two groups are far apart, so neither leaks into the
    other's neighbour list.  Returns (dataset, (index_x1, index_x2)).
    """
    g1 = _ring((0.0, 0.0), 11, 1.0)
    y1 = [-1] * 9 + [1] * 2
    g2 = _ring((100.0, 0.0), 11, 1.0, phase=0.1)
    y2 = [-1, 1] * 5 + [-1]
    X = np.vstack([[0.0, 0.0], g1, [100.0, 0.0], g2])
    y = np.array([-1] + y1 + [-1] + y2)
    return LabeledDataset(X, y, "neighbourhoods"), (0, 12)
