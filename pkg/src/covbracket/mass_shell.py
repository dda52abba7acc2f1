"""Cubic lattice of on-shell photon modes.

The invariant measure d^4k theta(k0) delta(k.k) reduces to d^3k / (2 k0); on a
lattice of spacing dk this becomes the weight dk^3 / (2 k0) per mode. The
origin is dropped (IR cutoff) and the cube half-width n_max is the UV cutoff.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .minkowski import LorentzMap, minkowski_dot
from .summation import NonFiniteError, fsum


def tetrad_for(k_spatial) -> np.ndarray:
    """Polarization tetrad for wavevector direction ``k_spatial``.

    Returns a 4x4 array whose row i is the contravariant vector eps^i:
    eps^0 = (1,0,0,0) and eps^i = (0, e_i) with e_3 along k, e_1 from
    Gram-Schmidt on the coordinate axis least aligned with k (first axis
    wins ties), e_2 = e_3 x e_1.
    """
    k = np.asarray(k_spatial, dtype=float)
    norm = np.linalg.norm(k)
    if norm == 0.0:
        raise ValueError("tetrad undefined for k = 0")
    e3 = k / norm
    axis = int(np.argmin(np.abs(e3)))  # argmin returns the first minimum
    seed = np.zeros(3)
    seed[axis] = 1.0
    e1 = seed - np.dot(seed, e3) * e3
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    tet = np.zeros((4, 4))
    tet[0, 0] = 1.0
    tet[1, 1:] = e1
    tet[2, 1:] = e2
    tet[3, 1:] = e3
    return tet


@dataclass(frozen=True)
class Mode:
    j: int
    k_spatial: np.ndarray
    k0: float
    w: float
    tetrad: np.ndarray

    @property
    def k(self) -> np.ndarray:
        """Contravariant wavevector (k0, k)."""
        return np.concatenate(([self.k0], self.k_spatial))


class ModeLattice:
    """Immutable set of on-shell modes on the cube [-n_max, n_max]^3 minus the origin.

    Per-mode data is kept as arrays (``k``, ``k0``, ``w``, ``tetrads``) so
    mode sums vectorize; ``modes`` gives the same data as :class:`Mode` records.
    """

    def __init__(self, delta_k: float, n_max: int, points: np.ndarray | None = None,
                 weights: np.ndarray | None = None, symmetric: bool = True):
        self.delta_k = float(delta_k)
        self.n_max = int(n_max)
        self.symmetric = symmetric
        if points is None:
            rng = range(-self.n_max, self.n_max + 1)
            idx = [t for t in itertools.product(rng, rng, rng) if t != (0, 0, 0)]
            self.indices = np.array(idx, dtype=int)
            points = self.delta_k * self.indices.astype(float)
        else:
            self.indices = None
        ks = np.asarray(points, dtype=float)
        k0 = np.linalg.norm(ks, axis=1)
        self.k = np.column_stack([k0, ks])
        self.k0 = k0
        self.w = (self.delta_k ** 3) / (2.0 * k0) if weights is None else np.asarray(weights, float)
        self.tetrads = np.array([tetrad_for(kv) for kv in ks])
        for arr in (self.k, self.k0, self.w, self.tetrads):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return len(self.k0)

    @property
    def k_lower(self) -> np.ndarray:
        out = self.k.copy()
        out[:, 1:] *= -1.0
        return out

    @property
    def modes(self) -> list[Mode]:
        return [Mode(j, self.k[j, 1:], float(self.k0[j]), float(self.w[j]), self.tetrads[j])
                for j in range(len(self))]

    def mirror_index(self) -> np.ndarray:
        """Index of the mode at -k for every mode (requires a symmetric lattice)."""
        lookup = {tuple(t): n for n, t in enumerate(self.indices)}
        return np.array([lookup[tuple(-t)] for t in self.indices])

    def params(self) -> dict:
        return {"delta_k": self.delta_k, "n_max": self.n_max}

    def __repr__(self) -> str:
        return f"ModeLattice(delta_k={self.delta_k}, n_max={self.n_max}, modes={len(self)})"


def build_lattice(delta_k: float, n_max: int) -> ModeLattice:
    if not (delta_k > 0) or not np.isfinite(delta_k):
        raise ValueError(f"delta_k must be positive, got {delta_k}")
    if int(n_max) != n_max or n_max < 1:
        raise ValueError(f"n_max must be an integer >= 1, got {n_max}")
    return ModeLattice(delta_k, int(n_max))


def measure_sum(lattice: ModeLattice, f: Callable[[ModeLattice], np.ndarray] | np.ndarray) -> float:
    """Sum_j w_j f_j with an exactly rounded, order-independent reduction.

    ``f`` is either an array of per-mode values or a vectorized callable taking
    the lattice. Non-finite integrands raise :class:`NonFiniteError`.
    """
    vals = f(lattice) if callable(f) else f
    vals = np.asarray(vals, dtype=float)
    if vals.shape != lattice.w.shape:
        raise ValueError("integrand must give one value per mode")
    if not np.all(np.isfinite(vals)):
        raise NonFiniteError("integrand is not finite on every mode")
    return fsum(lattice.w * vals)


def boost_mode(lam: LorentzMap, mode: Mode) -> Mode:
    """Boosted copy of ``mode``; k0 is re-derived from the boosted spatial part
    so the result is exactly null, and the weight is kept (invariant measure)."""
    kp = lam.m @ mode.k
    ks = kp[1:]
    return Mode(mode.j, ks, float(np.linalg.norm(ks)), mode.w, tetrad_for(ks))


def boost_lattice(lam: LorentzMap, lattice: ModeLattice) -> ModeLattice:
    """Irregular point set of boosted modes with the original weights.

    Only meaningful for integrands that are invariant under the boost.
    """
    kp = lattice.k @ lam.m.T
    return ModeLattice(lattice.delta_k, lattice.n_max, points=kp[:, 1:],
                       weights=lattice.w.copy(), symmetric=False)


def shell_residual(lattice: ModeLattice) -> np.ndarray:
    return np.abs(minkowski_dot(lattice.k, lattice.k))
