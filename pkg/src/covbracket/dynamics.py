"""Particle and mode evolution, tangent maps and the symplecticity check.

Sign chain. With p_mu = -m0 u_mu - (e/c) A_mu the proper-time Hamiltonian is
K = -(1/2 m0) (p + eA/c)^2 and {x^mu, p_nu} = delta^mu_nu, so

    dx^mu/dtau = -(p + eA/c)^mu / m0 = u^mu
    dp_mu/dtau = -(e/c) u^nu d_mu A_nu

and m0 du_mu/dtau = (e/c) F_{mu nu} u^nu with F_{mu nu} = d_mu A_nu - d_nu A_mu,
the Lorentz force. In lab time t (x^0 = c t) every rate is multiplied by
dtau/dt = m0 c / pi^0 with pi_mu = -(p_mu + e A_mu / c).

Modes are driven by differentiating the retarded amplitude,
dA_nu(j)/dt = 4 pi i e (dx_nu/dt) exp(i k.x) S_j. ``retarded`` uses S_j = 1;
``canonical`` uses S_j = a k0^2 / (8 pi^3), which makes the coupled system the
exact Hamiltonian flow of K under the joint bracket.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .brackets import BracketConfig, joint_poisson_tensor
from .field_state import TWO_PI_CUBED, FieldState
from .minkowski import METRIC_SIGNS
from .state import ParticleState, SystemState

CSV_COLUMNS = ["t", "x0", "x1", "x2", "x3", "p0", "p1", "p2", "p3",
               "mass_shell_residual", "field_energy_proxy"]
CSV_SCHEMA = "#schema=1"


class IntegrationError(RuntimeError):
    def __init__(self, msg: str, step: int):
        super().__init__(f"{msg} (step {step})")
        self.step = step


class TangentMapError(RuntimeError):
    pass


@dataclass(frozen=True)
class PlaneWave:
    """A_mu(x) = amplitude_mu cos(k.x + phase); amplitude covariant, k contravariant and null."""

    amplitude: np.ndarray
    k: np.ndarray
    phase: float = 0.0

    def __post_init__(self):
        amp = np.array(self.amplitude, float)
        k = np.array(self.k, float)
        if amp.shape != (4,) or k.shape != (4,):
            raise ValueError("plane wave needs 4-component amplitude and wavevector")
        if not k[0] > 0 or abs(k[0] ** 2 - k[1:] @ k[1:]) > 1e-12 * k[0] ** 2:
            raise ValueError("plane-wave wavevector must be future-directed and null")
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "k", k)

    @property
    def k_lower(self) -> np.ndarray:
        return METRIC_SIGNS * self.k

    def potential(self, x) -> tuple[np.ndarray, np.ndarray]:
        """(A_nu, d_mu A_nu) at contravariant x."""
        ph = self.k_lower @ x + self.phase
        return self.amplitude * math.cos(ph), -math.sin(ph) * np.outer(self.k_lower, self.amplitude)


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float
    steps: int
    scheme: Literal["rk4", "reference"] = "rk4"
    external_wave: PlaneWave | None = None
    coupling: Literal["external_only", "coupled"] = "external_only"
    source: Literal["retarded", "canonical"] = "retarded"
    clock: Literal["lab", "proper"] = "lab"
    a: float = 4.0
    c: float = 1.0
    reference_factor: int = 100

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if int(self.steps) != self.steps or self.steps < 0:
            raise ValueError("steps must be a non-negative integer")
        for name, allowed in (("scheme", ("rk4", "reference")),
                              ("coupling", ("external_only", "coupled")),
                              ("source", ("retarded", "canonical")),
                              ("clock", ("lab", "proper"))):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}")

    @property
    def duration(self) -> float:
        return self.dt * self.steps


# ---------------------------------------------------------------------------
# right-hand sides

class _System:
    """Flat-vector RHS for a fixed lattice and configuration."""

    def __init__(self, template: SystemState, cfg: EvolutionConfig):
        self.cfg = cfg
        self.m0 = template.particle.m0
        self.e = template.particle.e
        self.c = cfg.c
        lat = template.field.lattice
        self.n = len(lat)
        self.kl = lat.k_lower
        self.w = lat.w
        if cfg.source == "canonical":
            self.S = cfg.a * lat.k0 ** 2 / TWO_PI_CUBED
        else:
            self.S = np.ones(self.n)

    def split(self, y):
        n4 = 4 * self.n
        return y[:4], y[4:8], (y[8:8 + n4] + 1j * y[8 + n4:]).reshape(self.n, 4)

    def potential(self, x, amp):
        A = np.zeros(4)
        dA = np.zeros((4, 4))
        if self.cfg.external_wave is not None:
            a0, d0 = self.cfg.external_wave.potential(x)
            A = A + a0
            dA = dA + d0
        if self.cfg.coupling == "coupled" and self.n:
            ph = amp * np.exp(-1j * (self.kl @ x))[:, None]
            A = A + np.sum(2.0 * self.w[:, None] * ph.real, axis=0) / TWO_PI_CUBED
            dA = dA + np.sum(2.0 * self.w[:, None, None] * self.kl[:, :, None] * ph.imag[:, None, :],
                             axis=0) / TWO_PI_CUBED
        return A, dA

    def kinetic(self, y):
        x, p, amp = self.split(y)
        A, dA = self.potential(x, amp)
        pi_low = -(p + self.e * A / self.c)
        return x, amp, pi_low, dA

    def rhs(self, y):
        x, amp, pi_low, dA = self.kinetic(y)
        pi_up = METRIC_SIGNS * pi_low
        if self.cfg.clock == "lab":
            if not pi_up[0] > 0:
                raise ValueError("kinetic momentum is not future-directed (pi^0 <= 0)")
            xdot = self.c * pi_up / pi_up[0]
        else:
            xdot = pi_up / self.m0
        pdot = -(self.e / self.c) * dA @ xdot
        out = np.zeros_like(y)
        out[:4] = xdot
        out[4:8] = pdot
        if self.cfg.coupling == "coupled" and self.e != 0.0 and self.n:
            src = 4j * math.pi * self.e * np.exp(1j * (self.kl @ x)) * self.S
            damp = src[:, None] * (METRIC_SIGNS * xdot)[None, :]
            n4 = 4 * self.n
            out[8:8 + n4] = damp.real.ravel()
            out[8 + n4:] = damp.imag.ravel()
        return out


def particle_rhs(particle: ParticleState, A: np.ndarray, dA: np.ndarray, c: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Lab-time (dx^mu/dt, dp_mu/dt) given A_nu and d_mu A_nu at the particle."""
    pi_up = -METRIC_SIGNS * (particle.p + particle.e * np.asarray(A) / c)
    if not pi_up[0] > 0:
        raise ValueError("kinetic momentum is not future-directed (pi^0 <= 0)")
    xdot = c * pi_up / pi_up[0]
    return xdot, -(particle.e / c) * np.asarray(dA) @ xdot


def coupled_rhs(state: SystemState, cfg: EvolutionConfig) -> np.ndarray:
    return _System(state, cfg).rhs(state.to_vector())


# ---------------------------------------------------------------------------
# integration

def _rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _run(sys_: _System, y0: np.ndarray, h: float, steps: int, record: bool):
    y = np.array(y0, float)
    out = [y.copy()] if record else None
    for i in range(steps):
        try:
            y = _rk4_step(sys_.rhs, y, h)
        except (ValueError, FloatingPointError) as exc:
            raise IntegrationError(str(exc), i + 1) from exc
        if not np.all(np.isfinite(y)):
            raise IntegrationError("non-finite state", i + 1)
        if record:
            out.append(y.copy())
    return y, out


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (steps + 1, 8 + 8N) flat vectors
    template: SystemState
    cfg: EvolutionConfig
    diagnostics: dict = field(default_factory=dict)

    @property
    def final(self) -> SystemState:
        return self.template.from_vector(self.states[-1], float(self.times[-1]))

    def state(self, i: int) -> SystemState:
        return self.template.from_vector(self.states[i], float(self.times[i]))

    def mass_shell(self) -> np.ndarray:
        sys_ = _System(self.template, self.cfg)
        return np.array([mass_shell_residual_vec(sys_, y) for y in self.states])

    def field_energy(self) -> np.ndarray:
        lat = self.template.field.lattice
        return np.array([field_energy_proxy(self.template.from_vector(y).field) for y in self.states]) \
            if len(lat) else np.zeros(len(self.states))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_SCHEMA + "\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        ms, fe = self.mass_shell(), self.field_energy()
        for t, y, m, e in zip(self.times, self.states, ms, fe):
            wr.writerow([repr(float(t))] + [repr(float(v)) for v in y[:8]] + [repr(float(m)), repr(float(e))])
        return buf.getvalue()


def integrate(state: SystemState, cfg: EvolutionConfig, record: bool = True) -> Trajectory:
    sys_ = _System(state, cfg)
    if cfg.scheme == "reference":
        h, steps = cfg.dt / cfg.reference_factor, cfg.steps * cfg.reference_factor
    else:
        h, steps = cfg.dt, cfg.steps
    y_end, ys = _run(sys_, state.to_vector(), h, steps, record)
    if record:
        states = np.array(ys)
        times = state.time + h * np.arange(steps + 1)
        if cfg.scheme == "reference":
            states = states[::cfg.reference_factor]
            times = times[::cfg.reference_factor]
    else:
        states = np.array([state.to_vector(), y_end])
        times = np.array([state.time, state.time + cfg.duration])
    traj = Trajectory(times, states, state, cfg)
    ms = traj.mass_shell() if record else np.array([mass_shell_residual_vec(sys_, y) for y in states])
    traj.diagnostics["mass_shell_drift"] = float(np.max(np.abs(ms - ms[0])))
    return traj


def flow_map(state: SystemState, cfg: EvolutionConfig):
    """y0 -> y(T) as a function on flat vectors."""
    sys_ = _System(state, cfg)
    h, steps = (cfg.dt / cfg.reference_factor, cfg.steps * cfg.reference_factor) \
        if cfg.scheme == "reference" else (cfg.dt, cfg.steps)
    return lambda y0: _run(sys_, y0, h, steps, False)[0]


# ---------------------------------------------------------------------------
# diagnostics

def mass_shell_residual_vec(sys_: _System, y) -> float:
    _, _, pi_low, _ = sys_.kinetic(y)
    mc = sys_.m0 * sys_.c
    return float((np.sum(METRIC_SIGNS * pi_low ** 2) - mc ** 2) / mc ** 2)


def mass_shell_residual(state: SystemState, cfg: EvolutionConfig) -> float:
    """(pi.pi - m0^2 c^2) / (m0^2 c^2)."""
    return mass_shell_residual_vec(_System(state, cfg), state.to_vector())


def field_energy_proxy(f: FieldState) -> float:
    """-sum_j w_j k0_j A*_nu A^nu / (32 pi^4); positive for transverse modes.

    With the retarded source and no external wave, c p_0 - proxy is an exact
    invariant of the coupled equations (time-translation symmetry).
    """
    lat = f.lattice
    aa = np.sum(METRIC_SIGNS * np.abs(f.amp) ** 2, axis=1)
    return float(-np.sum(lat.w * lat.k0 * aa) / (32.0 * math.pi ** 4)) + 0.0


def transverse_zero_crossings(traj: Trajectory, axis: int) -> int:
    """Sign changes of the kinetic momentum component pi_axis minus its mean."""
    sys_ = _System(traj.template, traj.cfg)
    vals = np.array([sys_.kinetic(y)[2][axis] for y in traj.states])
    v = vals - vals.mean()
    s = np.sign(v)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def plane_wave_oracle(particle: ParticleState, wave: PlaneWave, T: float, dt: float,
                      lattice=None) -> ParticleState:
    """Endpoint of the reference scheme (RK4 at dt / 100) in a prescribed wave."""
    from .mass_shell import build_lattice

    lat = lattice if lattice is not None else build_lattice(1.0, 1)
    steps = int(round(T / dt))
    if not math.isclose(steps * dt, T, rel_tol=1e-12):
        raise ValueError("T must be an integer multiple of dt")
    cfg = EvolutionConfig(dt, steps, "reference", wave, "external_only")
    st = SystemState(particle, FieldState.zeros(lat))
    return integrate(st, cfg, record=False).final.particle


# ---------------------------------------------------------------------------
# tangent map and symplecticity

def _fd_jacobian(phi, y0, rel_step):
    d = len(y0)
    J = np.zeros((d, d))
    for i in range(d):
        h = rel_step * max(1.0, abs(y0[i]))
        yp, ym = y0.copy(), y0.copy()
        yp[i] += h
        ym[i] -= h
        J[:, i] = (phi(yp) - phi(ym)) / (yp[i] - ym[i])
    return J


def tangent_map(state: SystemState, cfg: EvolutionConfig, rel_step: float = 1e-6,
                richardson_tol: float = 1e-6, return_estimate: bool = False):
    """Jacobian d y(T) / d y(0) by central differences, with a step-halving check."""
    phi = flow_map(state, cfg)
    y0 = state.to_vector()
    if cfg.steps == 0:
        J = np.eye(len(y0))
        return (J, 0.0) if return_estimate else J
    J1 = _fd_jacobian(phi, y0, rel_step)
    J2 = _fd_jacobian(phi, y0, rel_step / 2)
    scale = max(np.max(np.abs(J2)), 1.0)
    err = float(np.max(np.abs(J1 - J2)) / scale)
    if not np.all(np.isfinite(J2)) or err > richardson_tol:
        raise TangentMapError(f"finite-difference tangent map did not converge (step-halving change {err:.3e})")
    return (J2, err) if return_estimate else J2


def bracket_matrix(J: np.ndarray, state: SystemState, cfg: EvolutionConfig) -> np.ndarray:
    """Full joint bracket matrix of evolved coordinates, J P J^T."""
    bc = BracketConfig(state.field.lattice, a=cfg.a, c=cfg.c)
    P = joint_poisson_tensor(bc)
    return J @ P @ J.T


def symplectic_check(state: SystemState, cfg: EvolutionConfig, rel_step: float = 1e-6,
                     J: np.ndarray | None = None) -> np.ndarray:
    """{x_mu(T), p_nu(T)} evaluated at the initial time; compare with eta."""
    if J is None:
        J = tangent_map(state, cfg, rel_step)
    M = bracket_matrix(J, state, cfg)
    return METRIC_SIGNS[:, None] * M[0:4, 4:8]


def symplectic_deviation(state: SystemState, cfg: EvolutionConfig, rel_step: float = 1e-6) -> float:
    return float(np.max(np.abs(symplectic_check(state, cfg, rel_step) - np.diag(METRIC_SIGNS))))


def to_json_matrix(m: np.ndarray) -> str:
    return json.dumps({"shape": list(m.shape), "data": np.asarray(m, float).tolist()})


def free_particle(m0: float = 1.0, velocity=(0.0, 0.0, 0.0), x=(0.0, 0.0, 0.0, 0.0),
                  c: float = 1.0, e: float = 0.0, A=None) -> ParticleState:
    """Particle with kinetic momentum m0 gamma (c, v); canonical p = -pi_lower - e A / c
    for the potential ``A`` (covariant) at the starting point."""
    v = np.asarray(velocity, float)
    beta2 = v @ v / c ** 2
    if beta2 >= 1:
        raise ValueError("speed must be below c")
    g = 1.0 / math.sqrt(1.0 - beta2)
    pi_up = m0 * g * np.concatenate(([c], v))
    A = np.zeros(4) if A is None else np.asarray(A, float)
    return ParticleState(np.asarray(x, float), -METRIC_SIGNS * pi_up - e * A / c, m0, e)


def with_particle(state: SystemState, **kw) -> SystemState:
    return replace(state, particle=replace(state.particle, **kw))
