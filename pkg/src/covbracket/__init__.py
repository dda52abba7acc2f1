"""Covariant Poisson brackets for a charged particle coupled to the electromagnetic field."""

from .minkowski import ETA, FourVector, LorentzMap, minkowski_dot
from .mass_shell import ModeLattice, build_lattice, measure_sum
from .field_state import FieldState
from .state import ParticleState, SystemState
from .observables import PolyObservable, GenericObservable, parse

__version__ = "0.1.0"

__all__ = [
    "ETA", "FourVector", "LorentzMap", "minkowski_dot",
    "ModeLattice", "build_lattice", "measure_sum",
    "FieldState", "ParticleState", "SystemState",
    "PolyObservable", "GenericObservable", "parse",
]
