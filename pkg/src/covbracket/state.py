"""Particle and joint system states, plus the flat real phase-space layout.

Flat layout (length 8 + 8N): ``x^mu`` (4), ``p_mu`` (4), ``Re A_mu(j)`` (4N),
``Im A_mu(j)`` (4N), amplitudes in lattice order, mu fastest.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .field_state import FieldState


@dataclass(frozen=True)
class ParticleState:
    """``x`` is the contravariant position (x^0 = c t); ``p`` the covariant
    canonical momentum p_mu = -m0 u_mu - (e/c) A_mu."""

    x: np.ndarray
    p: np.ndarray
    m0: float = 1.0
    e: float = 0.0

    def __post_init__(self):
        for name in ("x", "p"):
            v = np.array(getattr(self, name), dtype=float)
            if v.shape != (4,) or not np.all(np.isfinite(v)):
                raise ValueError(f"particle {name} must be 4 finite numbers")
            v.flags.writeable = False
            object.__setattr__(self, name, v)
        if not self.m0 > 0:
            raise ValueError("rest mass must be positive")


@dataclass(frozen=True)
class SystemState:
    particle: ParticleState
    field: FieldState
    time: float = 0.0

    @property
    def lattice(self):
        return self.field.lattice

    def to_vector(self) -> np.ndarray:
        amp = self.field.amp.ravel()
        return np.concatenate([self.particle.x, self.particle.p, amp.real, amp.imag])

    def from_vector(self, y: np.ndarray, time: float | None = None) -> "SystemState":
        n = len(self.field.lattice) * 4
        amp = (y[8:8 + n] + 1j * y[8 + n:8 + 2 * n]).reshape(-1, 4)
        particle = replace(self.particle, x=y[:4], p=y[4:8])
        return SystemState(particle, self.field.with_amp(amp), self.time if time is None else time)


def phase_dimension(n_modes: int) -> int:
    return 8 + 8 * n_modes
