"""Phase-space observables: exact polynomials and black-box functions.

Primitive coordinates are the covariant amplitudes ``A[j,mu]`` and their
conjugates ``Ac[j,mu]`` (treated as independent, Wirtinger style) plus the
particle's covariant ``x[mu]`` and ``p[mu]``. Canonical (q, pi) observables
are built from the amplitudes through the exact linear map in
:mod:`covbracket.field_state`.
"""

from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from .field_state import FieldState, TWO_PI_CUBED, normalization
from .mass_shell import ModeLattice
from .minkowski import METRIC_SIGNS

SECTORS = ("A", "Ac", "x", "p")
_SECTOR_ORDER = {s: n for n, s in enumerate(SECTORS)}


class Var(NamedTuple):
    sector: str
    j: int | None
    mu: int

    def sort_key(self):
        return (_SECTOR_ORDER[self.sector], -1 if self.j is None else self.j, self.mu)

    def conjugate(self) -> "Var":
        if self.sector == "A":
            return Var("Ac", self.j, self.mu)
        if self.sector == "Ac":
            return Var("A", self.j, self.mu)
        return self

    def __str__(self):
        if self.j is None:
            return f"{self.sector}[{self.mu}]"
        return f"{self.sector}[{self.j},{self.mu}]"


Monomial = tuple  # sorted tuple of Var, repeats allowed


def _canon(mono) -> Monomial:
    return tuple(sorted(mono, key=Var.sort_key))


def _is_zero(c) -> bool:
    try:
        return c == 0
    except TypeError:
        return False


class PolyObservable:
    """Polynomial in the primitive variables with exact term bookkeeping.

    Coefficients are usually Python complex numbers but any ring element
    supporting ``+``, ``*`` and ``conjugate`` works (the exact Jacobi check
    uses sympy numbers).
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        acc: dict = {}
        for mono, coeff in (terms.items() if isinstance(terms, dict) else (terms or [])):
            key = _canon(mono)
            acc[key] = acc.get(key, 0) + coeff
        self.terms = {m: c for m, c in sorted(acc.items(), key=lambda kv: [v.sort_key() for v in kv[0]])
                      if not _is_zero(c)}

    # construction -----------------------------------------------------
    @classmethod
    def const(cls, c) -> "PolyObservable":
        return cls({(): c})

    @classmethod
    def var(cls, v: Var, coeff=1) -> "PolyObservable":
        return cls({(v,): coeff})

    # algebra ----------------------------------------------------------
    def __add__(self, other):
        other = _lift(other)
        merged = list(self.terms.items()) + list(other.terms.items())
        return PolyObservable(merged)

    __radd__ = __add__

    def __neg__(self):
        return PolyObservable({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-_lift(other))

    def __rsub__(self, other):
        return _lift(other) - self

    def __mul__(self, other):
        other = _lift(other)
        out = []
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                out.append((m1 + m2, c1 * c2))
        return PolyObservable(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        other = _lift(other)
        return self.terms == other.terms

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for m, c in self.terms.items():
            parts.append("*".join([f"({c})"] + [str(v) for v in m]))
        return " + ".join(parts)

    def conjugate(self) -> "PolyObservable":
        return PolyObservable({tuple(v.conjugate() for v in m): _conj(c) for m, c in self.terms.items()})

    def variables(self) -> set:
        return {v for m in self.terms for v in m}

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((len(m) for m in self.terms), default=0)

    # calculus ---------------------------------------------------------
    def partial(self, v: Var) -> "PolyObservable":
        out = []
        for m, c in self.terms.items():
            n = m.count(v)
            if n:
                rest = list(m)
                rest.remove(v)
                out.append((tuple(rest), c * n))
        return PolyObservable(out)

    def evaluate(self, state) -> complex:
        vals = _value_table(state, self.variables())
        total_re, total_im = [], []
        for m, c in self.terms.items():
            t = complex(c)
            for v in m:
                t *= vals[v]
            total_re.append(t.real)
            total_im.append(t.imag)
        return complex(math.fsum(total_re), math.fsum(total_im))

    def gradient(self, state) -> dict:
        """Value of every non-trivial partial derivative at ``state``."""
        vals = _value_table(state, self.variables())
        grad: dict = defaultdict(list)
        for m, c in self.terms.items():
            counts = Counter(m)
            for v, n in counts.items():
                t = complex(c) * n
                for u, k in counts.items():
                    t *= vals[u] ** (k - 1 if u == v else k)
                grad[v].append(t)
        return {v: complex(math.fsum(z.real for z in ts), math.fsum(z.imag for z in ts))
                for v, ts in grad.items()}


def _conj(c):
    try:
        return c.conjugate()
    except AttributeError:
        return c


def _lift(o) -> PolyObservable:
    if isinstance(o, PolyObservable):
        return o
    return PolyObservable.const(o)


def _field_and_particle(state):
    if isinstance(state, FieldState):
        return state, None
    return state.field, state.particle


def _value_table(state, variables) -> dict:
    field, particle = _field_and_particle(state)
    vals = {}
    for v in variables:
        if v.sector in ("A", "Ac"):
            if not 0 <= v.j < field.amp.shape[0] or not 0 <= v.mu < 4:
                raise IndexError(f"variable {v} out of range")
            z = field.amp[v.j, v.mu]
            vals[v] = z if v.sector == "A" else np.conj(z)
        else:
            if particle is None:
                raise ValueError(f"variable {v} needs a particle state")
            if not 0 <= v.mu < 4:
                raise IndexError(f"variable {v} out of range")
            if v.sector == "x":
                vals[v] = complex(METRIC_SIGNS[v.mu] * particle.x[v.mu])
            else:
                vals[v] = complex(particle.p[v.mu])
    return vals


def evaluate(o, state) -> complex:
    return o.evaluate(state)


def partial(o: PolyObservable, v: Var) -> PolyObservable:
    return o.partial(v)


# ---------------------------------------------------------------------------
# named observables

def amp(j: int, mu: int) -> PolyObservable:
    return PolyObservable.var(Var("A", j, mu))


def amp_conj(j: int, mu: int) -> PolyObservable:
    return PolyObservable.var(Var("Ac", j, mu))


def x_obs(mu: int) -> PolyObservable:
    return PolyObservable.var(Var("x", None, mu))


def p_obs(mu: int) -> PolyObservable:
    return PolyObservable.var(Var("p", None, mu))


def _phase(lattice: ModeLattice, j: int, x) -> complex:
    x = np.zeros(4) if x is None else np.asarray(x, float)
    return complex(np.exp(-1j * (lattice.k_lower[j] @ x)))


def q_obs(lattice: ModeLattice, j: int, nu: int, x=None, c: float = 1.0) -> PolyObservable:
    """q_nu(j) phased at x."""
    e = _phase(lattice, j, x)
    n = float(normalization(lattice, c)[j])
    return PolyObservable({(Var("Ac", j, nu),): 1j * np.conj(e) / n, (Var("A", j, nu),): -1j * e / n})


def s_obs(lattice: ModeLattice, j: int, nu: int, x=None, c: float = 1.0) -> PolyObservable:
    e = _phase(lattice, j, x)
    n = float(normalization(lattice, c)[j])
    return PolyObservable({(Var("Ac", j, nu),): np.conj(e) / n, (Var("A", j, nu),): e / n})


def pi_obs(lattice: ModeLattice, j: int, lam: int, nu: int, x=None, c: float = 1.0) -> PolyObservable:
    """pi_{lam nu}(j) = k_lam s_nu."""
    return float(lattice.k_lower[j, lam]) * s_obs(lattice, j, nu, x, c)


def potential_obs(lattice: ModeLattice, mu: int, x) -> PolyObservable:
    """A_mu(x) as a linear observable (evaluates to reconstruct_potential)."""
    terms = []
    for j in range(len(lattice)):
        e = _phase(lattice, j, x)
        cw = lattice.w[j] / TWO_PI_CUBED
        terms.append(((Var("A", j, mu),), cw * e))
        terms.append(((Var("Ac", j, mu),), cw * np.conj(e)))
    return PolyObservable(terms)


def theta_obs(lattice: ModeLattice, lam: int, nu: int, x, c: float = 1.0) -> PolyObservable:
    """theta_{lam nu}(x) = -(1/4 pi c) d_lam A_nu(x) as a linear observable."""
    terms = []
    for j in range(len(lattice)):
        e = _phase(lattice, j, x)
        cw = -lattice.w[j] / TWO_PI_CUBED / (4.0 * np.pi * c) * lattice.k_lower[j, lam]
        terms.append(((Var("A", j, nu),), cw * (-1j) * e))
        terms.append(((Var("Ac", j, nu),), cw * 1j * np.conj(e)))
    return PolyObservable(terms)


def polarization_obs(lattice: ModeLattice, j: int, i: int) -> PolyObservable:
    """Coefficient of A(j) along tetrad vector eps^i.

    Index 0 is the time component; i = 1..3 is minus the Euclidean projection
    of the covariant spatial components on e_i, so that
    A^mu = sum_i c_i eps^{i mu}.
    """
    if i == 0:
        return amp(j, 0)
    e = lattice.tetrads[j, i, 1:]
    return PolyObservable([((Var("A", j, a + 1),), -float(e[a])) for a in range(3) if e[a] != 0.0])


def amplitude_3d_obs(lattice: ModeLattice, j: int, lam: int) -> PolyObservable:
    """Three-dimensional transverse amplitude A_lam(k) = A_lam(k_alpha) / sqrt(2 k0)."""
    return polarization_obs(lattice, j, lam) * (1.0 / math.sqrt(2.0 * lattice.k0[j]))


def conj_obs(o: PolyObservable) -> PolyObservable:
    return o.conjugate()


# ---------------------------------------------------------------------------
# black-box observables

@dataclass(frozen=True)
class GenericObservable:
    evaluator: Callable
    fd_step: float = 1e-5

    def evaluate(self, state) -> complex:
        return complex(self.evaluator(state))


def _perturb(state, v: Var, delta: complex):
    field, particle = _field_and_particle(state)
    if v.sector in ("A", "Ac"):
        amp_ = np.array(field.amp)
        amp_[v.j, v.mu] += delta
        nf = field.with_amp(amp_)
        return nf if particle is None else replace(state, field=nf)
    if particle is None:
        raise ValueError("particle variable on a field-only state")
    if v.sector == "x":
        x = np.array(particle.x)
        x[v.mu] += METRIC_SIGNS[v.mu] * delta.real
        return replace(state, particle=replace(particle, x=x))
    p = np.array(particle.p)
    p[v.mu] += delta.real
    return replace(state, particle=replace(particle, p=p))


def fd_gradient(o, state, v: Var, step: float | None = None) -> complex:
    """Central-difference partial derivative with respect to ``v``.

    Amplitude variables are complex: derivatives in the real and imaginary
    directions are combined into the Wirtinger derivative d/dA or d/dA*.
    """
    h = getattr(o, "fd_step", 1e-5) if step is None else step
    if not h > 0:
        raise ValueError("fd_step must be positive")
    f = o.evaluate
    if v.sector in ("x", "p"):
        d = (f(_perturb(state, v, h)) - f(_perturb(state, v, -h))) / (2 * h)
        if not np.isfinite(d):
            raise ValueError(f"non-finite evaluation while differentiating along {v}")
        return complex(d)
    base = Var("A", v.j, v.mu)
    dr = (f(_perturb(state, base, h)) - f(_perturb(state, base, -h))) / (2 * h)
    di = (f(_perturb(state, base, 1j * h)) - f(_perturb(state, base, -1j * h))) / (2 * h)
    if not (np.isfinite(dr) and np.isfinite(di)):
        raise ValueError(f"non-finite evaluation while differentiating along {v}")
    if v.sector == "A":
        return complex(0.5 * (dr - 1j * di))
    return complex(0.5 * (dr + 1j * di))


# ---------------------------------------------------------------------------
# textual expressions:  expr := term (('+'|'-') term)* ;  term := factor ('*' factor)* ;
# factor := NUMBER | VAR | '(' expr ')' | '-' factor ;
# VAR := 'A[' j ',' mu ']' | 'Ac[' j ',' mu ']' | 'x[' mu ']' | 'p[' mu ']' ;
# NUMBER := python float literal with optional 'j' suffix (imaginary)

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?j?)"
                    r"|(?P<var>Ac|A|x|p)\[(?P<idx>[^\]]*)\]|(?P<op>[-+*()]))")


class ExpressionError(ValueError):
    pass


def _tokenize(text: str):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExpressionError(f"unexpected input at {pos}: {text[pos:pos + 10]!r}")
        if m.group("num"):
            out.append(("num", complex(m.group("num")) if m.group("num").endswith("j")
                        else float(m.group("num"))))
        elif m.group("var"):
            try:
                idx = [int(s) for s in m.group("idx").split(",")]
            except ValueError as err:
                raise ExpressionError(f"bad index list {m.group('idx')!r}") from err
            out.append(("var", (m.group("var"), idx)))
        else:
            out.append(("op", m.group("op")))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expr(self):
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            node = node + rhs if op == "+" else node - rhs
        return node

    def term(self):
        node = self.factor()
        while self.peek() == ("op", "*"):
            self.take()
            node = node * self.factor()
        return node

    def factor(self):
        kind, val = self.take()
        if kind == "num":
            return PolyObservable.const(val)
        if kind == "var":
            name, idx = val
            if name in ("A", "Ac"):
                if len(idx) != 2:
                    raise ExpressionError(f"{name} needs [j,mu]")
                return PolyObservable.var(Var(name, idx[0], idx[1]))
            if len(idx) != 1:
                raise ExpressionError(f"{name} needs [mu]")
            return PolyObservable.var(Var(name, None, idx[0]))
        if (kind, val) == ("op", "-"):
            return -self.factor()
        if (kind, val) == ("op", "("):
            node = self.expr()
            if self.take() != ("op", ")"):
                raise ExpressionError("missing ')'")
            return node
        raise ExpressionError(f"unexpected token {val!r}")


def parse(text: str) -> PolyObservable:
    p = _Parser(_tokenize(text))
    node = p.expr()
    if p.i != len(p.toks):
        raise ExpressionError(f"trailing input after token {p.i}")
    return node


# ---------------------------------------------------------------------------
# random samples for property checks

def random_polynomial(rng: np.random.Generator, n_modes: int, n_terms: int = 4, degree: int = 3,
                      particle: bool = False, field: bool = True, modes=None) -> PolyObservable:
    """Random complex polynomial in the primitive coordinates."""
    pool = []
    js = range(n_modes) if modes is None else modes
    if field:
        pool += [Var(s, j, mu) for s in ("A", "Ac") for j in js for mu in range(4)]
    if particle:
        pool += [Var(s, None, mu) for s in ("x", "p") for mu in range(4)]
    if not pool:
        raise ValueError("no variables to draw from")
    terms = []
    for _ in range(n_terms):
        d = int(rng.integers(1, degree + 1))
        mono = tuple(pool[int(i)] for i in rng.integers(0, len(pool), size=d))
        coeff = complex(rng.normal(), rng.normal())
        terms.append((mono, coeff))
    return PolyObservable(terms)


def random_state(rng: np.random.Generator, lattice: ModeLattice, scale: float = 1.0, c: float = 1.0,
                 a: float = 4.0) -> FieldState:
    n = len(lattice)
    amp = scale * (rng.normal(size=(n, 4)) + 1j * rng.normal(size=(n, 4)))
    return FieldState(lattice, amp, c, a)
