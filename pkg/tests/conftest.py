"""Shared helpers for the test suite."""

import numpy as np


def subspace_distance(a, b):
    """Operator-norm distance between the column spaces of two matrices."""
    pa = a @ a.conj().T
    pb = b @ b.conj().T
    return float(np.linalg.norm(pa - pb, ord=2))


def hermitian_gap(matrix):
    return float(np.max(np.abs(matrix - matrix.conj().T)))
