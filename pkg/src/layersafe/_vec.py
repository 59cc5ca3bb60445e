"""Small shared vector helpers, broadcast friendly over the trailing axis.

Every module routes Euclidean norms and inner products through these so the
scalar and batched code paths perform bit-identical arithmetic.
"""
from __future__ import annotations

import numpy as np


def vnorm(v) -> np.ndarray:
    """Euclidean norm over the trailing axis."""
    v = np.asarray(v, dtype=float)
    return np.sqrt(np.sum(v * v, axis=-1))


def vdot(a, b) -> np.ndarray:
    """Inner product over the trailing axis."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.sum(a * b, axis=-1)
