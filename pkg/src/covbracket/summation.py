"""Order-independent, correctly rounded reductions.

Every mode sum in the package goes through here so results are bit-identical
across runs and across any partitioning of the work.
"""

import math

import numpy as np


class NonFiniteError(ValueError):
    pass


def fsum(values) -> float:
    v = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("non-finite term in reduction")
    return math.fsum(v.tolist())


def csum(values) -> complex:
    v = np.asarray(values, dtype=complex).ravel()
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("non-finite term in reduction")
    return complex(math.fsum(v.real.tolist()), math.fsum(v.imag.tolist()))


def fsum_axis0(values: np.ndarray) -> np.ndarray:
    """Exactly rounded sum over the leading (mode) axis, elementwise over the rest."""
    v = np.asarray(values)
    flat = v.reshape(v.shape[0], -1)
    if np.iscomplexobj(flat):
        out = np.array([csum(flat[:, i]) for i in range(flat.shape[1])])
    else:
        out = np.array([fsum(flat[:, i]) for i in range(flat.shape[1])])
    return out.reshape(v.shape[1:])
