"""Mode amplitudes of the free-plus-radiated field and their canonical form.

Amplitudes are stored as covariant components A_mu(j) (shape ``(N, 4)``,
complex). Canonical variables carry the plane-wave phase of a declared
space-time point x::

    a = A exp(-i k.x),  q = i (a* - a) / sqrt(8 pi c k0),  s = (a* + a) / sqrt(8 pi c k0)

and the generalized momentum is the rank-one pi_{mu nu} = k_mu s_nu.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .mass_shell import ModeLattice, build_lattice
from .minkowski import METRIC_SIGNS, FourVector
from .summation import fsum_axis0

TWO_PI_CUBED = (2.0 * np.pi) ** 3


def _x_array(x) -> np.ndarray:
    if isinstance(x, FourVector):
        return x.upper().array
    arr = np.asarray(x, dtype=float)
    if arr.shape != (4,):
        raise ValueError("space-time point needs 4 contravariant components")
    return arr


def phases(lattice: ModeLattice, x) -> np.ndarray:
    """k_j . x for every mode (contravariant x)."""
    return lattice.k_lower @ _x_array(x)


@dataclass(frozen=True)
class FieldState:
    lattice: ModeLattice
    amp: np.ndarray
    c: float = 1.0
    a: float = 4.0

    def __post_init__(self):
        amp = np.array(self.amp, dtype=complex)
        if amp.shape != (len(self.lattice), 4):
            raise ValueError(f"amp must have shape ({len(self.lattice)}, 4), got {amp.shape}")
        if not np.all(np.isfinite(amp)):
            raise ValueError("amplitudes must be finite")
        amp.flags.writeable = False
        object.__setattr__(self, "amp", amp)

    @classmethod
    def zeros(cls, lattice: ModeLattice, c: float = 1.0, a: float = 4.0) -> "FieldState":
        return cls(lattice, np.zeros((len(lattice), 4), complex), c, a)

    def with_amp(self, amp) -> "FieldState":
        return replace(self, amp=amp)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amp) ** 2)))

    def to_json(self) -> str:
        return json.dumps({
            "lattice": self.lattice.params(),
            "c": self.c,
            "a": self.a,
            "amp": [[[z.real, z.imag] for z in row] for row in self.amp],
        })

    @classmethod
    def from_json(cls, text: str) -> "FieldState":
        doc = json.loads(text)
        lat = build_lattice(doc["lattice"]["delta_k"], doc["lattice"]["n_max"])
        amp = np.array([[complex(re, im) for re, im in row] for row in doc["amp"]])
        return cls(lat, amp, doc.get("c", 1.0), doc.get("a", 4.0))


@dataclass(frozen=True)
class CanonicalState:
    lattice: ModeLattice
    q: np.ndarray
    s: np.ndarray
    phase_x: np.ndarray
    c: float = 1.0
    a: float = 4.0

    def pi(self, j: int) -> np.ndarray:
        """pi_{mu nu}(j) = k_mu s_nu, all indices down."""
        return np.outer(self.lattice.k_lower[j], self.s[j])


def normalization(lattice: ModeLattice, c: float) -> np.ndarray:
    return np.sqrt(8.0 * np.pi * c * lattice.k0)


def to_canonical(f: FieldState, x) -> CanonicalState:
    xa = _x_array(x)
    a = f.amp * np.exp(-1j * phases(f.lattice, xa))[:, None]
    n = normalization(f.lattice, f.c)[:, None]
    q = (2.0 * a.imag) / n
    s = (2.0 * a.real) / n
    return CanonicalState(f.lattice, q, s, xa.copy(), f.c, f.a)


def from_canonical(cs: CanonicalState, x) -> FieldState:
    xa = _x_array(x)
    if not np.array_equal(xa, cs.phase_x):
        raise ValueError("phase point differs from the one the canonical state was built at")
    n = normalization(cs.lattice, cs.c)[:, None]
    a = n * (cs.s + 1j * cs.q) / 2.0
    return FieldState(cs.lattice, a * np.exp(1j * phases(cs.lattice, xa))[:, None], cs.c, cs.a)


def _phased(f: FieldState, x) -> np.ndarray:
    return f.amp * np.exp(-1j * phases(f.lattice, x))[:, None]


def reconstruct_potential(f: FieldState, x) -> np.ndarray:
    """Covariant A_nu(x) = (2pi)^-3 sum_j w_j [A_nu(j) e^{-ik.x} + c.c.]."""
    terms = 2.0 * f.lattice.w[:, None] * _phased(f, x).real
    return fsum_axis0(terms) / TWO_PI_CUBED


def potential_gradient(f: FieldState, x) -> np.ndarray:
    """d_mu A_nu(x) as a 4x4 array [mu, nu] (derivative index first)."""
    ph = _phased(f, x)
    kl = f.lattice.k_lower
    # d/dx^mu of A e^{-ik.x} + c.c. = 2 k_mu Im(A e^{-ik.x})
    terms = 2.0 * f.lattice.w[:, None, None] * kl[:, :, None] * ph.imag[:, None, :]
    return fsum_axis0(terms) / TWO_PI_CUBED


def conjugate_momentum(f: FieldState, x) -> np.ndarray:
    """theta_{mu nu}(x) = -(1 / 4 pi c) d_mu A_nu(x)."""
    return -potential_gradient(f, x) / (4.0 * np.pi * f.c)


def divergence(f: FieldState, x) -> float:
    g = potential_gradient(f, x)
    return float(np.sum(METRIC_SIGNS * np.diag(g)))


def lorentz_condition_residual(f: FieldState) -> np.ndarray:
    """|k^mu A_mu| per mode."""
    return np.abs(np.einsum("jm,jm->j", f.lattice.k, f.amp))


def ddw_free_density_amp(f: FieldState, j: int, k=None) -> float:
    """Free part of the momentum-space de Donder-Weyl density,
    -(k.k) / (4 pi c k0) A*_nu A^nu, for mode ``j``.

    ``k`` overrides the (contravariant) wavevector, which is how off-shell
    checks are made; the default is the lattice mode, where the result is 0.
    """
    kv = f.lattice.k[j] if k is None else np.asarray(k, float)
    kk = kv[0] ** 2 - kv[1:] @ kv[1:]
    aa = np.sum(METRIC_SIGNS * np.conj(f.amp[j]) * f.amp[j]).real
    return float(-kk / (4.0 * np.pi * f.c * kv[0]) * aa)


def ddw_free_density(cs: CanonicalState, j: int, k=None) -> float:
    """Same density in canonical form, -(1/2) pi_{mu nu} pi^{mu nu} - (k.k)/2 q_nu q^nu."""
    kv = cs.lattice.k[j] if k is None else np.asarray(k, float)
    kl = METRIC_SIGNS * kv
    pi = np.outer(kl, cs.s[j])
    pi_up = METRIC_SIGNS[:, None] * pi * METRIC_SIGNS[None, :]
    kk = kv[0] ** 2 - kv[1:] @ kv[1:]
    qq = np.sum(METRIC_SIGNS * cs.q[j] ** 2)
    return float(-0.5 * np.sum(pi * pi_up) - 0.5 * kk * qq)


def canonical_from_amplitudes(amp_row, k, c: float = 1.0, x=None):
    """(q, s) for a single amplitude row and an arbitrary wavevector ``k``.

    Used for off-shell unit checks where no lattice mode exists.
    """
    kv = np.asarray(k, float)
    ph = 0.0 if x is None else (METRIC_SIGNS * kv) @ _x_array(x)
    a = np.asarray(amp_row, complex) * np.exp(-1j * ph)
    n = np.sqrt(8.0 * np.pi * c * kv[0])
    return 2.0 * a.imag / n, 2.0 * a.real / n


def verify_free_field_hamilton(f: FieldState, x) -> dict:
    """Residuals of d_mu q_nu = -pi_{mu nu} and d_mu pi^{mu nu} = (k.k) q^nu.

    Derivatives are taken analytically on the phased variables
    q(x), s(x); each plane-wave factor e^{-ik.x} contributes -i k_mu.
    """
    lat = f.lattice
    kl = lat.k_lower
    ph = _phased(f, x)
    n = normalization(lat, f.c)[:, None]
    # d_mu a = -i k_mu a ; d_mu a* = +i k_mu a*
    da = -1j * kl[:, :, None] * ph[:, None, :]
    dq = (1j * (np.conj(da) - da) / n[:, :, None]).real
    s = 2.0 * ph.real / n
    q = 2.0 * ph.imag / n
    pi = kl[:, :, None] * s[:, None, :]
    first = np.max(np.abs(dq + pi), axis=(1, 2))

    ds = ((np.conj(da) + da) / n[:, :, None]).real  # d_mu s_nu
    # d_mu pi^{mu nu} = k^mu d_mu s^nu
    div_pi = np.einsum("jm,jmn->jn", lat.k, ds) * METRIC_SIGNS
    kk = lat.k[:, 0] ** 2 - np.sum(lat.k[:, 1:] ** 2, axis=1)
    rhs = kk[:, None] * q * METRIC_SIGNS
    second = np.max(np.abs(div_pi - rhs), axis=1)
    return {
        "first": first,
        "second": second,
        "max_first": float(first.max()),
        "max_second": float(second.max()),
        "q_scale": float(np.max(np.abs(q))) if q.size else 0.0,
    }
