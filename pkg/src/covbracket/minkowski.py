"""Four-vectors, the metric diag(+1, -1, -1, -1) and proper Lorentz maps."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

ETA = np.diag([1.0, -1.0, -1.0, -1.0])
ETA.flags.writeable = False
METRIC_SIGNS = np.array([1.0, -1.0, -1.0, -1.0])
METRIC_SIGNS.flags.writeable = False

_AXES = {"x": 1, "y": 2, "z": 3}

Variance = Literal["contravariant", "covariant"]


@dataclass(frozen=True)
class FourVector:
    """Four components plus their index position.

    Storage is whatever ``variance`` says; :meth:`upper` and :meth:`lower`
    return the other view. Raising/lowering only flips spatial signs, so the
    round trip is exact.
    """

    t: float
    x: float
    y: float
    z: float
    variance: Variance = "contravariant"

    @classmethod
    def from_array(cls, arr, variance: Variance = "contravariant") -> "FourVector":
        a = np.asarray(arr, dtype=float)
        if a.shape != (4,):
            raise ValueError(f"expected 4 components, got shape {a.shape}")
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]), variance)

    @property
    def array(self) -> np.ndarray:
        return np.array([self.t, self.x, self.y, self.z])

    def upper(self) -> "FourVector":
        if self.variance == "contravariant":
            return self
        return FourVector.from_array(METRIC_SIGNS * self.array, "contravariant")

    def lower(self) -> "FourVector":
        if self.variance == "covariant":
            return self
        return FourVector.from_array(METRIC_SIGNS * self.array, "covariant")

    def __add__(self, other: "FourVector") -> "FourVector":
        other = other.upper() if self.variance == "contravariant" else other.lower()
        return FourVector.from_array(self.array + other.array, self.variance)

    def __mul__(self, s: float) -> "FourVector":
        return FourVector.from_array(s * self.array, self.variance)

    __rmul__ = __mul__


def _contra(v) -> np.ndarray:
    if isinstance(v, FourVector):
        return v.upper().array
    return np.asarray(v)


def minkowski_dot(u, v):
    """u^0 v^0 - u.v for contravariant components (arrays broadcast on the last axis)."""
    u = _contra(u)
    v = _contra(v)
    return u[..., 0] * v[..., 0] - u[..., 1] * v[..., 1] - u[..., 2] * v[..., 2] - u[..., 3] * v[..., 3]


def lower(v: np.ndarray) -> np.ndarray:
    return METRIC_SIGNS * np.asarray(v)


raise_index = lower  # the metric is its own inverse


@dataclass(frozen=True)
class LorentzMap:
    """A proper orthochronous Lorentz transformation acting on contravariant vectors.

    Only built through :func:`boost`, :func:`rotation`, :func:`identity` and
    :meth:`compose`, so eta-preservation holds by construction.
    """

    m: np.ndarray = field(repr=False)

    def compose(self, other: "LorentzMap") -> "LorentzMap":
        """``self`` after ``other``."""
        return LorentzMap(self.m @ other.m)

    def __matmul__(self, other: "LorentzMap") -> "LorentzMap":
        return self.compose(other)

    def inverse(self) -> "LorentzMap":
        return LorentzMap(ETA @ self.m.T @ ETA)

    def eta_residual(self) -> float:
        return float(np.max(np.abs(self.m.T @ ETA @ self.m - ETA)))


def identity() -> LorentzMap:
    return LorentzMap(np.eye(4))


def boost(axis: str, rapidity: float) -> LorentzMap:
    if not np.isfinite(rapidity):
        raise ValueError("rapidity must be finite")
    i = _AXES[axis]
    m = np.eye(4)
    ch, sh = np.cosh(rapidity), np.sinh(rapidity)
    m[0, 0] = m[i, i] = ch
    m[0, i] = m[i, 0] = sh
    return LorentzMap(m)


def rotation(axis: str, angle: float) -> LorentzMap:
    """Spatial rotation by ``angle`` about a coordinate axis (right-handed)."""
    i = _AXES[axis]
    a, b = [k for k in (1, 2, 3) if k != i]
    if i == 2:
        a, b = b, a
    m = np.eye(4)
    c, s = np.cos(angle), np.sin(angle)
    # exact entries for multiples of 90 degrees keep lattice symmetries exact
    q = angle / (np.pi / 2)
    if abs(q - round(q)) < 1e-15:
        c, s = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][int(round(q)) % 4]
    m[a, a] = m[b, b] = c
    m[a, b] = -s
    m[b, a] = s
    return LorentzMap(m)


def apply(lam: LorentzMap, v):
    """Transform ``v``; covariant vectors use the inverse transpose."""
    if isinstance(v, FourVector):
        if v.variance == "covariant":
            return FourVector.from_array(ETA @ lam.m @ ETA @ v.array, "covariant")
        return FourVector.from_array(lam.m @ v.array, "contravariant")
    return np.asarray(v) @ lam.m.T
