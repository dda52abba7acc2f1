"""Covariant Poisson brackets on the mode lattice and their independent oracles.

Lattice conventions for the continuum distributions:

* theta(k0) delta(k.k) delta^4(k - k')  ->  delta_{jj'} / w_j
* functional derivative dF/dA(k_j)      ->  (1 / w_j) dF/dA_j

so the amplitude bracket is ``a sum_j (k0_j^2 / w_j) eta^{mu mu} [...]``.
The squared on-shell delta that multiplies position-space brackets of mode
sums has the lattice image ``rho_j = 4 k0_j^2`` (see :func:`coincidence_factor`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import observables as obs
from .field_state import FieldState, TWO_PI_CUBED
from .mass_shell import ModeLattice
from .minkowski import METRIC_SIGNS, ETA, LorentzMap
from .observables import GenericObservable, PolyObservable, Var
from .summation import csum, fsum

CONSISTENCY_TOL = 1e-10


class BracketConsistencyError(RuntimeError):
    """The amplitude route and the (q, pi) quadrature route disagree."""


@dataclass(frozen=True)
class BracketConfig:
    lattice: ModeLattice
    a: float = 4.0
    c: float = 1.0
    phase_x: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        if self.a == 0:
            raise ValueError("bracket constant a must be non-zero")
        if not self.c > 0:
            raise ValueError("c must be positive")


@dataclass(frozen=True)
class BracketReport:
    value: complex
    field_part: complex
    particle_part: complex
    kind: str = "joint"
    consistency_residual: float = 0.0

    def to_json(self) -> str:
        pair = lambda z: [z.real, z.imag]  # noqa: E731
        return json.dumps({
            "kind": self.kind,
            "value": pair(self.value),
            "field_part": pair(self.field_part),
            "particle_part": pair(self.particle_part),
            "consistency_residual": self.consistency_residual,
        })


# ---------------------------------------------------------------------------
# kernels

def amp_kernel(cfg: BracketConfig) -> np.ndarray:
    """a k0^2 / w_j per mode."""
    lat = cfg.lattice
    return cfg.a * lat.k0 ** 2 / lat.w


def v_kernel(cfg: BracketConfig) -> np.ndarray:
    """V_mu = a k0 k_mu (covariant), shape (N, 4)."""
    lat = cfg.lattice
    return cfg.a * lat.k0[:, None] * lat.k_lower


def coincidence_factor(lattice: ModeLattice) -> np.ndarray:
    """Lattice image of the squared on-shell delta delta^2(0).

    theta delta(k.k) delta^4(k-k') = [delta(k0-|k|) delta(k0-k0') / 2k0] delta^3(k-k');
    with the 4D rule (delta_jj'/w_j) and the 3D rule (delta_jj'/dk^3) the
    bracketed radial pair maps to 2 k0 dk^3 / w_j = 4 k0^2.
    """
    return 4.0 * lattice.k0 ** 2


def joint_poisson_tensor(cfg: BracketConfig, with_particle: bool = True) -> np.ndarray:
    """Constant Poisson tensor of the joint bracket in flat real coordinates
    (x^mu, p_mu, Re A, Im A)."""
    n = len(cfg.lattice)
    d = 8 + 8 * n
    P = np.zeros((d, d))
    if with_particle:
        P[0:4, 4:8] = np.eye(4)
        P[4:8, 0:4] = -np.eye(4)
    beta = -2.0 * np.pi * cfg.c * amp_kernel(cfg)
    for j in range(n):
        r = 8 + 4 * j
        i = 8 + 4 * n + 4 * j
        P[r:r + 4, i:i + 4] = beta[j] * ETA
        P[i:i + 4, r:r + 4] = -beta[j] * ETA
    return P


# ---------------------------------------------------------------------------
# gradients

@dataclass
class Gradient:
    dA: np.ndarray   # dF/dA_mu(j), (N, 4)
    dAc: np.ndarray  # dF/dA*_mu(j)
    dx: np.ndarray   # dF/dx_mu (covariant position components)
    dp: np.ndarray   # dF/dp_mu

    def real_vector(self) -> np.ndarray:
        """Gradient in the flat real coordinates of :mod:`covbracket.state`."""
        return np.concatenate([METRIC_SIGNS * self.dx, self.dp,
                               (self.dA + self.dAc).ravel(),
                               (1j * (self.dA - self.dAc)).ravel()])


def gradient(o, state, lattice: ModeLattice) -> Gradient:
    n = len(lattice)
    g = Gradient(np.zeros((n, 4), complex), np.zeros((n, 4), complex),
                 np.zeros(4, complex), np.zeros(4, complex))
    if isinstance(o, PolyObservable):
        for v, val in o.gradient(state).items():
            if v.sector == "A":
                g.dA[v.j, v.mu] = val
            elif v.sector == "Ac":
                g.dAc[v.j, v.mu] = val
            elif v.sector == "x":
                g.dx[v.mu] = val
            else:
                g.dp[v.mu] = val
        return g
    for j in range(n):
        for mu in range(4):
            g.dA[j, mu] = obs.fd_gradient(o, state, Var("A", j, mu))
            g.dAc[j, mu] = obs.fd_gradient(o, state, Var("Ac", j, mu))
    if not isinstance(state, FieldState):
        for mu in range(4):
            g.dx[mu] = obs.fd_gradient(o, state, Var("x", None, mu))
            g.dp[mu] = obs.fd_gradient(o, state, Var("p", None, mu))
    return g


def _require_field_only(*os):
    for o in os:
        if isinstance(o, PolyObservable) and any(v.sector in ("x", "p") for v in o.variables()):
            raise ValueError("field bracket called with particle-dependent observable")


def _require_range(cfg, *os):
    n = len(cfg.lattice)
    for o in os:
        if isinstance(o, PolyObservable):
            for v in o.variables():
                if v.j is not None and not 0 <= v.j < n:
                    raise IndexError(f"{v} outside lattice of {n} modes")


# ---------------------------------------------------------------------------
# field brackets

def _amp_terms(gA: Gradient, gB: Gradient, cfg: BracketConfig) -> np.ndarray:
    k = amp_kernel(cfg)[:, None] * METRIC_SIGNS[None, :]
    return k * (gA.dA * gB.dAc - gB.dA * gA.dAc)


def bracket_amp(A, B, state, cfg: BracketConfig) -> complex:
    """{A, B}_{AA*} = a sum_j (k0^2 / w_j) eta^{mu mu} [dA/dA_mu dB/dA*_mu - (A <-> B)]."""
    _require_field_only(A, B)
    _require_range(cfg, A, B)
    gA, gB = gradient(A, state, cfg.lattice), gradient(B, state, cfg.lattice)
    return csum(_amp_terms(gA, gB, cfg))


def _qpi_quadrature(gA: Gradient, gB: Gradient, cfg: BracketConfig) -> tuple[complex, float]:
    """(q, pi) form with kernel V_mu = a k0 k_mu, chain-ruled through (q, s).

    pi_{mu nu} = k_mu s_nu is extended off the rank-one surface as
    s_nu = n^mu pi_{mu nu} with n = (1/k0, 0, 0, 0); because V is parallel to
    k the result does not depend on that choice.
    """
    lat = cfg.lattice
    ph = np.exp(1j * (lat.k_lower @ cfg.phase_x))[:, None]
    nrm = np.sqrt(8.0 * np.pi * cfg.c * lat.k0)[:, None]

    def qs(g):
        fa = g.dA * ph            # d/d(phased a)
        fac = g.dAc * np.conj(ph)
        dq = 0.5j * nrm * (fa - fac)
        ds = 0.5 * nrm * (fa + fac)
        ext = np.zeros((len(lat), 4))
        ext[:, 0] = 1.0 / lat.k0
        dpi = ext[:, :, None] * ds[:, None, :]  # dF/dpi_{mu nu}
        return dq, dpi

    qa, pa = qs(gA)
    qb, pb = qs(gB)
    V = v_kernel(cfg)
    eta_q_a = METRIC_SIGNS * qa  # dA/dq^nu
    eta_q_b = METRIC_SIGNS * qb
    terms = (V[:, :, None] * (eta_q_a[:, None, :] * pb - eta_q_b[:, None, :] * pa)) / lat.w[:, None, None]
    scale = float(np.sum(np.abs(V[:, :, None] * eta_q_a[:, None, :] * pb / lat.w[:, None, None]))
                  + np.sum(np.abs(V[:, :, None] * eta_q_b[:, None, :] * pa / lat.w[:, None, None])))
    return csum(terms), scale


def bracket_qpi_report(A, B, state, cfg: BracketConfig) -> BracketReport:
    _require_field_only(A, B)
    _require_range(cfg, A, B)
    gA, gB = gradient(A, state, cfg.lattice), gradient(B, state, cfg.lattice)
    route_i = 4j * np.pi * cfg.c * csum(_amp_terms(gA, gB, cfg))
    route_ii, scale = _qpi_quadrature(gA, gB, cfg)
    resid = abs(route_i - route_ii) / scale if scale > 0 else abs(route_i - route_ii)
    if resid > CONSISTENCY_TOL:
        raise BracketConsistencyError(f"q-pi routes disagree: {route_i} vs {route_ii} (rel {resid:.2e})")
    return BracketReport(complex(route_i), complex(route_i), 0j, "qpi", float(resid))


def bracket_qpi(A, B, state, cfg: BracketConfig) -> complex:
    """{A, B}_{q pi} = 4 pi i c {A, B}_{AA*}, cross-checked against the direct quadrature."""
    return bracket_qpi_report(A, B, state, cfg).value


def bracket_particle(A, B, state) -> complex:
    """dA/dx_mu dB/dp^mu - dB/dx_mu dA/dp^mu."""
    if isinstance(A, PolyObservable) and isinstance(B, PolyObservable):
        ga, gb = A.gradient(state), B.gradient(state)
        terms = []
        for mu in range(4):
            xv, pv = Var("x", None, mu), Var("p", None, mu)
            terms.append(METRIC_SIGNS[mu] * (ga.get(xv, 0) * gb.get(pv, 0) - gb.get(xv, 0) * ga.get(pv, 0)))
        return csum(terms)
    lat = state.field.lattice
    ga, gb = gradient(A, state, lat), gradient(B, state, lat)
    return csum(METRIC_SIGNS * (ga.dx * gb.dp - gb.dx * ga.dp))


def bracket_joint(A, B, state, cfg: BracketConfig) -> BracketReport:
    """{A, B}_QP = {A, B}_xp + {A, B}_{q pi}."""
    _require_range(cfg, A, B)
    lat = cfg.lattice
    gA, gB = gradient(A, state, lat), gradient(B, state, lat)
    route_i = 4j * np.pi * cfg.c * csum(_amp_terms(gA, gB, cfg))
    route_ii, scale = _qpi_quadrature(gA, gB, cfg)
    resid = abs(route_i - route_ii) / scale if scale > 0 else abs(route_i - route_ii)
    if resid > CONSISTENCY_TOL:
        raise BracketConsistencyError(f"q-pi routes disagree (rel {resid:.2e})")
    part = csum(METRIC_SIGNS * (gA.dx * gB.dp - gB.dx * gA.dp))
    return BracketReport(complex(route_i + part), complex(route_i), complex(part), "joint", float(resid))


def bracket_real_form(A, B, state, cfg: BracketConfig) -> complex:
    """Joint bracket as grad(A)^T P grad(B) in flat real coordinates (third, independent route)."""
    lat = cfg.lattice
    P = joint_poisson_tensor(cfg)
    ga = gradient(A, state, lat).real_vector()
    gb = gradient(B, state, lat).real_vector()
    return complex(ga @ P @ gb)


# ---------------------------------------------------------------------------
# algebraic (polynomial -> polynomial) brackets

def amp_kernel_exact(lattice: ModeLattice, a=4):
    """Exact a k0^2 / w_j = 2 a |n_j|^3 as sympy numbers (lattice spacing cancels)."""
    import sympy

    a = sympy.nsimplify(a)
    return [2 * a * sympy.sqrt(int(np.dot(t, t))) ** 3 for t in lattice.indices]


def poly_bracket_amp(A: PolyObservable, B: PolyObservable, cfg: BracketConfig, kernel=None) -> PolyObservable:
    kern = amp_kernel(cfg) if kernel is None else kernel
    out = PolyObservable()
    js = sorted({(v.j, v.mu) for v in A.variables() | B.variables() if v.sector in ("A", "Ac")})
    for j, mu in js:
        v, vc = Var("A", j, mu), Var("Ac", j, mu)
        term = A.partial(v) * B.partial(vc) - B.partial(v) * A.partial(vc)
        if not term.is_zero():
            k = kern[j] * int(METRIC_SIGNS[mu])
            out = out + term * k
    return out


def poly_bracket_particle(A: PolyObservable, B: PolyObservable) -> PolyObservable:
    out = PolyObservable()
    for mu in range(4):
        xv, pv = Var("x", None, mu), Var("p", None, mu)
        term = A.partial(xv) * B.partial(pv) - B.partial(xv) * A.partial(pv)
        if not term.is_zero():
            out = out + term * int(METRIC_SIGNS[mu])
    return out


def poly_bracket_qpi(A, B, cfg: BracketConfig, kernel=None, i_factor=None) -> PolyObservable:
    fac = 4j * math.pi * cfg.c if i_factor is None else i_factor
    return poly_bracket_amp(A, B, cfg, kernel) * fac


def poly_bracket_joint(A, B, cfg: BracketConfig, kernel=None, i_factor=None) -> PolyObservable:
    return poly_bracket_qpi(A, B, cfg, kernel, i_factor) + poly_bracket_particle(A, B)


# ---------------------------------------------------------------------------
# non-equal-time brackets

class FreeFieldFlow:
    """Exact free evolution from time s to tau in phased-amplitude coordinates.

    Coordinates at time t are z_j(t) = A_j exp(-i k0_j t) (t measured as x^0),
    so the flow is a per-mode phase rotation and observables written in the
    constant amplitudes A are rewritten through A = z(tau) exp(i k0 tau).
    """

    def __init__(self, lattice: ModeLattice, s: float, tau: float):
        self.lattice, self.s, self.tau = lattice, float(s), float(tau)

    def coordinate_gradient(self, g: Gradient) -> np.ndarray:
        rot = np.exp(1j * self.lattice.k0 * self.tau)[:, None]
        gz = Gradient(g.dA * rot, g.dAc * np.conj(rot), g.dx, g.dp)
        return gz.real_vector()

    @property
    def jacobian(self) -> np.ndarray:
        n = len(self.lattice)
        d = 8 + 8 * n
        J = np.eye(d)
        phi = -self.lattice.k0 * (self.tau - self.s)
        c, s = np.cos(phi), np.sin(phi)
        for j in range(n):
            r = 8 + 4 * j
            i = 8 + 4 * n + 4 * j
            for mu in range(4):
                J[r + mu, r + mu] = c[j]
                J[r + mu, i + mu] = -s[j]
                J[i + mu, r + mu] = s[j]
                J[i + mu, i + mu] = c[j]
        return J


class NumericalFlow:
    """Tangent map produced by :func:`covbracket.dynamics.tangent_map` (amplitude coordinates)."""

    def __init__(self, jacobian: np.ndarray, condition_limit: float = 1e12):
        self.jacobian = np.asarray(jacobian, float)
        cond = np.linalg.cond(self.jacobian)
        if not np.isfinite(cond) or cond > condition_limit:
            raise np.linalg.LinAlgError(f"tangent map ill-conditioned (cond {cond:.3e})")

    @staticmethod
    def coordinate_gradient(g: Gradient) -> np.ndarray:
        return g.real_vector()


def bracket_nonequal_time(A, B, s: float, flow, state, cfg: BracketConfig) -> complex:
    """{A, B}(s): pull A and B back to the coordinates at time s through the
    flow's tangent map, then contract with the joint Poisson tensor."""
    lat = cfg.lattice
    J = flow.jacobian
    ga = flow.coordinate_gradient(gradient(A, state, lat)) @ J
    gb = flow.coordinate_gradient(gradient(B, state, lat)) @ J
    P = joint_poisson_tensor(cfg)
    terms = ga[:, None] * P * gb[None, :]
    nz = P != 0
    return csum(terms[nz])


# ---------------------------------------------------------------------------
# Pauli-Jordan quadrature (no bracket machinery)

def _weights(lattice: ModeLattice, weight: str) -> np.ndarray:
    if weight == "plain":
        return np.ones(len(lattice))
    if weight == "coincidence":
        return coincidence_factor(lattice)
    raise ValueError(f"unknown weight {weight!r}")


def pauli_jordan_lattice(x, lattice: ModeLattice, weight: str = "plain") -> float:
    """Delta_lat(x) = -(2pi)^-3 sum_j dk^3 sin(k.x) / k0 (optionally times rho_j)."""
    x = np.asarray(x, float)
    ph = lattice.k_lower @ x
    rho = _weights(lattice, weight)
    return -fsum(lattice.delta_k ** 3 * rho * np.sin(ph) / lattice.k0) / TWO_PI_CUBED


def pauli_jordan_grad(x, lattice: ModeLattice, weight: str = "plain") -> np.ndarray:
    """d_lam Delta_lat (covariant derivative index), analytic."""
    x = np.asarray(x, float)
    ph = lattice.k_lower @ x
    rho = _weights(lattice, weight)
    base = lattice.delta_k ** 3 * rho * np.cos(ph) / lattice.k0
    return np.array([-fsum(base * lattice.k_lower[:, lam]) for lam in range(4)]) / TWO_PI_CUBED


def dirichlet_kernel(r, lattice: ModeLattice, weight: str = "plain") -> float:
    """Lattice image of delta^3(r): (2pi)^-3 sum_j dk^3 cos(k.r) (optionally times rho_j)."""
    r = np.asarray(r, float)
    rho = _weights(lattice, weight)
    return fsum(lattice.delta_k ** 3 * rho * np.cos(lattice.k[:, 1:] @ r)) / TWO_PI_CUBED


def k_mu_oracle(x_sp, xp_sp, cfg: BracketConfig, weight: str = "coincidence") -> np.ndarray:
    """K_mu(x, x') mode sum with V_mu = a k0 k_mu, the on-shell ratio
    (k.V)/(k.k) taken as its limit a k0; each mode carries the coincidence
    weight unless ``weight='plain'``."""
    lat = cfg.lattice
    ks = lat.k[:, 1:]
    sx, sxp = np.sin(ks @ np.asarray(x_sp)), np.sin(ks @ np.asarray(xp_sp))
    cx, cxp = np.cos(ks @ np.asarray(x_sp)), np.cos(ks @ np.asarray(xp_sp))
    V = v_kernel(cfg)
    ratio = cfg.a * lat.k0
    rho = _weights(lat, weight)
    integrand = (lat.w * rho / lat.k0)[:, None] * (
        V * (sx * sxp)[:, None] + ratio[:, None] * lat.k_lower * (cx * cxp)[:, None])
    return np.array([fsum(integrand[:, m]) for m in range(4)]) / (4.0 * np.pi ** 3)


def field_theta_bracket_oracle(x, xp, cfg: BracketConfig, state=None) -> dict:
    """{A_mu(x), theta_{lam nu}(x')} two ways, as arrays indexed [mu, lam, nu].

    ``chain``: the bracket engine applied to the potential and momentum
    observables. ``kmu``: (1/4)(1/8pi^3) eta_{mu nu} K_lam with per-mode
    coincidence weights; requires x^0 == x'^0.
    """
    x, xp = np.asarray(x, float), np.asarray(xp, float)
    lat = cfg.lattice
    if state is None:
        state = FieldState.zeros(lat, cfg.c, cfg.a)
    chain = np.zeros((4, 4, 4), complex)
    pots = [obs.potential_obs(lat, mu, x) for mu in range(4)]
    for lam in range(4):
        for nu in range(4):
            th = obs.theta_obs(lat, lam, nu, xp, cfg.c)
            for mu in range(4):
                chain[mu, lam, nu] = bracket_qpi(pots[mu], th, state, cfg)
    out = {"chain": chain}
    if x[0] == xp[0]:
        K = k_mu_oracle(x[1:], xp[1:], cfg)
        out["kmu"] = 0.25 / (8.0 * np.pi ** 3) * np.einsum("mn,l->mln", ETA, K)
    return out


def potential_potential_bracket(x, xp, s: float, cfg: BracketConfig, state=None) -> np.ndarray:
    """{A_mu(x), A_nu(x')}(s) through the free-flow pullback, [mu, nu]."""
    lat = cfg.lattice
    if state is None:
        state = FieldState.zeros(lat, cfg.c, cfg.a)
    flow = FreeFieldFlow(lat, s, tau=float(np.asarray(x)[0]))
    out = np.zeros((4, 4), complex)
    pa = [obs.potential_obs(lat, mu, x) for mu in range(4)]
    pb = [obs.potential_obs(lat, mu, xp) for mu in range(4)]
    for mu in range(4):
        for nu in range(4):
            out[mu, nu] = bracket_nonequal_time(pa[mu], pb[nu], s, flow, state, cfg)
    return out


def potential_theta_bracket(x, xp, s: float, cfg: BracketConfig, state=None) -> np.ndarray:
    """{A_mu(x), theta_{lam nu}(x')}(s) through the free-flow pullback, [mu, lam, nu]."""
    lat = cfg.lattice
    if state is None:
        state = FieldState.zeros(lat, cfg.c, cfg.a)
    flow = FreeFieldFlow(lat, s, tau=float(np.asarray(x)[0]))
    out = np.zeros((4, 4, 4), complex)
    pa = [obs.potential_obs(lat, mu, x) for mu in range(4)]
    for lam in range(4):
        for nu in range(4):
            th = obs.theta_obs(lat, lam, nu, xp, cfg.c)
            for mu in range(4):
                out[mu, lam, nu] = bracket_nonequal_time(pa[mu], th, s, flow, state, cfg)
    return out


def extract_constant(values: np.ndarray, model: np.ndarray) -> float:
    """Least-squares C in values ~ C * model."""
    values, model = np.ravel(values), np.ravel(model)
    return float(np.real(np.vdot(model, values)) / np.real(np.vdot(model, model)))


# ---------------------------------------------------------------------------
# Lorentz invariance of the quadrature

def boost_invariance_check(x, lam: LorentzMap, lattice: ModeLattice, weight: str = "plain") -> dict:
    x = np.asarray(x, float)
    d0 = pauli_jordan_lattice(x, lattice, weight)
    d1 = pauli_jordan_lattice(lam.m @ x, lattice, weight)
    scale = max(abs(d0), abs(d1))
    dev = 0.0 if d0 == d1 else abs(d1 - d0) / scale
    return {"delta": d0, "delta_boosted": d1, "deviation": dev}
