"""Polarization decomposition, the Lorentz constraint, and the reduction of the
amplitude bracket to the two-polarization form.

Coefficients c_i(j) are taken along the contravariant tetrad, A^mu = sum_i c_i eps^{i mu},
so c_0 = A_0 and c_i = -e_i . A_spatial (covariant components). With this
choice k^mu A_mu = k0 (c_0 - c_3) and the Lorentz condition reads c_0 = c_3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .brackets import BracketConfig, Gradient, amp_kernel, gradient
from .field_state import FieldState
from .mass_shell import ModeLattice
from .minkowski import METRIC_SIGNS
from .summation import csum

# eta_ii of the orthonormal tetrad; the bracket in polarization components
# carries these signs (scalar term positive, spatial terms negative).
POLARIZATION_SIGNS = np.array([1.0, -1.0, -1.0, -1.0])
COMPATIBILITY_TOL = 1e-12


class IncompatibleObservableError(ValueError):
    """Observable partials along the scalar and longitudinal polarizations differ."""


@dataclass(frozen=True)
class PolarizationComponents:
    lattice: ModeLattice
    coeffs: np.ndarray  # (N, 4) complex, c_i(j)

    def recompose(self) -> np.ndarray:
        """Covariant amplitudes A_mu(j) = eta_mu mu sum_i c_i eps^{i mu}."""
        upper = np.einsum("ji,jim->jm", self.coeffs, self.lattice.tetrads)
        return upper * METRIC_SIGNS


def decompose(f: FieldState) -> PolarizationComponents:
    # tetrad rows are orthonormal in the Minkowski sense, so c_i = eta_ii eps^i . A (lowered)
    coeffs = np.einsum("jim,jm->ji", f.lattice.tetrads, f.amp) * POLARIZATION_SIGNS
    return PolarizationComponents(f.lattice, coeffs)


def recompose(pc: PolarizationComponents, f: FieldState | None = None) -> FieldState:
    amp = pc.recompose()
    if f is None:
        return FieldState(pc.lattice, amp)
    return f.with_amp(amp)


def constraint_residual(pc: PolarizationComponents) -> np.ndarray:
    return np.abs(pc.coeffs[:, 0] - pc.coeffs[:, 3])


def project_constraint(f: FieldState) -> FieldState:
    pc = decompose(f)
    c = np.array(pc.coeffs)
    avg = 0.5 * (c[:, 0] + c[:, 3])
    c[:, 0] = avg
    c[:, 3] = avg
    return f.with_amp(PolarizationComponents(f.lattice, c).recompose())


# ---------------------------------------------------------------------------
# gradients in polarization and 3D variables

def polarization_gradient(g: Gradient, lattice: ModeLattice) -> tuple[np.ndarray, np.ndarray]:
    """dF/dc_i and dF/dc*_i from dF/dA_mu (chain rule, tetrad is real)."""
    tet = lattice.tetrads * METRIC_SIGNS[None, None, :]  # dA_mu / dc_i
    return np.einsum("jim,jm->ji", tet, g.dA), np.einsum("jim,jm->ji", tet, g.dAc)


def _pol_gradients(A, B, state, cfg):
    ga, gb = gradient(A, state, cfg.lattice), gradient(B, state, cfg.lattice)
    return polarization_gradient(ga, cfg.lattice), polarization_gradient(gb, cfg.lattice)


def _pair_terms(pa, pb) -> np.ndarray:
    (a, ac), (b, bc) = pa, pb
    return a * bc - b * ac  # (N, 4)


def bracket_polarized(A, B, state, cfg: BracketConfig) -> complex:
    """a sum_j (k0^2 / w_j) ([scalar term] - sum_{i=1..3} [i term])."""
    pa, pb = _pol_gradients(A, B, state, cfg)
    terms = amp_kernel(cfg)[:, None] * POLARIZATION_SIGNS * _pair_terms(pa, pb)
    return csum(terms)


def cancellation_witness(A, B, state, cfg: BracketConfig) -> dict:
    """Per-mode scalar and longitudinal contributions and their sum."""
    pa, pb = _pol_gradients(A, B, state, cfg)
    t = amp_kernel(cfg)[:, None] * POLARIZATION_SIGNS * _pair_terms(pa, pb)
    return {"scalar": t[:, 0], "longitudinal": t[:, 3], "sum": t[:, 0] + t[:, 3]}


def compatibility_residual(o, state, lattice: ModeLattice) -> float:
    d, dc = polarization_gradient(gradient(o, state, lattice), lattice)
    return float(max(np.max(np.abs(d[:, 0] - d[:, 3]), initial=0.0),
                     np.max(np.abs(dc[:, 0] - dc[:, 3]), initial=0.0)))


def _check_compatible(o, pol, name):
    d, dc = pol
    scale = max(np.max(np.abs(d), initial=0.0), np.max(np.abs(dc), initial=0.0), 1.0)
    resid = max(np.max(np.abs(d[:, 0] - d[:, 3]), initial=0.0),
                np.max(np.abs(dc[:, 0] - dc[:, 3]), initial=0.0))
    if resid > COMPATIBILITY_TOL * scale:
        raise IncompatibleObservableError(
            f"observable {name} is not constraint-compatible (scalar/longitudinal partials differ by {resid:.3e})")


def bracket_reduced(A, B, state, cfg: BracketConfig, check: bool = True) -> complex:
    """Transverse-only bracket -(a/2) sum_j dk^3 k0_j / w_j^2 sum_{lam=1,2} [...].

    dk^3 k0 / (2 w^2) = k0^2 / w, so this is the polarized bracket with the
    scalar and longitudinal terms dropped; they cancel for compatible observables.
    """
    pa, pb = _pol_gradients(A, B, state, cfg)
    if check:
        _check_compatible(A, pa, "A")
        _check_compatible(B, pb, "B")
    lat = cfg.lattice
    kern = 0.5 * cfg.a * lat.delta_k ** 3 * lat.k0 / lat.w ** 2
    return -csum(kern[:, None] * _pair_terms(pa, pb)[:, 1:3])


def to_3d_amplitudes(pc: PolarizationComponents) -> np.ndarray:
    """(N, 2) transverse 3D amplitudes c_lam / sqrt(2 k0)."""
    return pc.coeffs[:, 1:3] / np.sqrt(2.0 * pc.lattice.k0)[:, None]


def from_3d_amplitudes(b: np.ndarray, lattice: ModeLattice) -> np.ndarray:
    return np.asarray(b) * np.sqrt(2.0 * lattice.k0)[:, None]


def gradient_3d(pol, lattice: ModeLattice):
    """dF/db_lam from dF/dc_lam: c = sqrt(2 k0) b."""
    d, dc = pol
    f = np.sqrt(2.0 * lattice.k0)[:, None]
    return d[:, 1:3] * f, dc[:, 1:3] * f


def coincidence_weight(lattice: ModeLattice) -> np.ndarray:
    return 4.0 * lattice.k0 ** 2


def bracket_standard(A, B, state, cfg: BracketConfig, check: bool = True) -> complex:
    """Two-polarization bracket in 3D amplitudes,
    -(a/4) sum_j dk^3 rho_j (1/dk^3)^2 sum_lam [dA/db dB/db* - (A <-> B)],
    with rho_j = 4 k0^2 the coincidence weight of the squared on-shell delta.
    """
    pa, pb = _pol_gradients(A, B, state, cfg)
    if check:
        _check_compatible(A, pa, "A")
        _check_compatible(B, pb, "B")
    lat = cfg.lattice
    a3, ac3 = gradient_3d(pa, lat)
    b3, bc3 = gradient_3d(pb, lat)
    dk3 = lat.delta_k ** 3
    kern = 0.25 * cfg.a * dk3 * coincidence_weight(lat) / dk3 ** 2
    return -csum(kern[:, None] * (a3 * bc3 - b3 * ac3))


def reduction_chain(A, B, state, cfg: BracketConfig) -> dict:
    """The four brackets and relative residuals of each link."""
    from .brackets import bracket_amp

    vals = {
        "amp": bracket_amp(A, B, state, cfg),
        "polarized": bracket_polarized(A, B, state, cfg),
        "reduced": bracket_reduced(A, B, state, cfg),
        "standard": bracket_standard(A, B, state, cfg),
    }
    names = list(vals)
    # relative to the summed per-component term magnitudes, so exactly cancelling brackets are not noise / noise
    ga, gb = gradient(A, state, cfg.lattice), gradient(B, state, cfg.lattice)
    terms = amp_kernel(cfg)[:, None] * (ga.dA * gb.dAc - gb.dA * ga.dAc)
    scale = max(float(np.sum(np.abs(terms))), max(abs(v) for v in vals.values()), np.finfo(float).tiny)
    links = {f"{p}->{q}": float(abs(vals[p] - vals[q]) / scale) for p, q in zip(names, names[1:])}
    return {"values": vals, "links": links}


def pair_bracket_ratio(lattice: ModeLattice, cfg: BracketConfig, j: int, lam: int = 1) -> float:
    """{c_lam, c*_lam} / {b_lam, b*_lam} for mode j; analytically 2 k0_j."""
    from . import observables as obs

    state = FieldState.zeros(lattice, cfg.c, cfg.a)
    c = obs.polarization_obs(lattice, j, lam)
    b = obs.amplitude_3d_obs(lattice, j, lam)
    four = bracket_reduced(c, c.conjugate(), state, cfg)
    three = bracket_standard(b, b.conjugate(), state, cfg)
    return float((four / three).real)


def random_compatible_observable(rng: np.random.Generator, lattice: ModeLattice, n_terms: int = 3,
                                 degree: int = 2, modes=None):
    """Random polynomial in c_0 + c_3, c_1, c_2 and their conjugates.

    Scalar and longitudinal components only enter through c_0 + c_3, so the
    partials along them agree identically.
    """
    from . import observables as obs

    js = list(range(len(lattice))) if modes is None else list(modes)
    pool = []
    for j in js:
        s = obs.polarization_obs(lattice, j, 0) + obs.polarization_obs(lattice, j, 3)
        for o in (s, obs.polarization_obs(lattice, j, 1), obs.polarization_obs(lattice, j, 2)):
            pool += [o, o.conjugate()]
    out = obs.PolyObservable()
    for _ in range(n_terms):
        d = int(rng.integers(1, degree + 1))
        term = obs.PolyObservable.const(complex(rng.normal(), rng.normal()))
        for i in rng.integers(0, len(pool), size=d):
            term = term * pool[int(i)]
        out = out + term
    return out
