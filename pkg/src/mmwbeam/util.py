"""Small shared helpers."""
from __future__ import annotations

import numpy as np


def to_db(x):
    """Linear power ratio -> dB."""
    return 10.0 * np.log10(x)


def from_db(x):
    """dB -> linear power ratio."""
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)
