import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covbracket import observables as O
from covbracket.dynamics import free_particle
from covbracket.field_state import FieldState, reconstruct_potential, conjugate_momentum, to_canonical
from covbracket.observables import ExpressionError, GenericObservable, PolyObservable, Var, parse
from covbracket.state import SystemState


def test_parse_and_evaluate(lat26, rng):
    f = O.random_state(rng, lat26)
    o = parse("2*A[1,0]*Ac[1,0] - (3+1j)*A[2,3] + 1.5")
    want = 2 * f.amp[1, 0] * np.conj(f.amp[1, 0]) - (3 + 1j) * f.amp[2, 3] + 1.5
    assert o.evaluate(f) == pytest.approx(want, rel=1e-14)


@pytest.mark.parametrize("bad", ["A[1]", "x[0,1]", "A[1,0", "2 *", "q[1]", "(A[0,0]"])
def test_parse_errors(bad):
    with pytest.raises(ExpressionError):
        parse(bad)


def test_zero_terms_purged():
    a = parse("A[0,0] + x[1]")
    assert (a - a).is_zero()
    assert a == parse("x[1] + A[0,0]")


def test_partial_and_degree():
    o = parse("A[0,1]*A[0,1]*Ac[2,0]")
    assert o.degree() == 3
    assert o.partial(Var("A", 0, 1)) == parse("2*A[0,1]*Ac[2,0]")
    assert o.partial(Var("x", None, 0)).is_zero()


def test_conjugate_swaps_sectors():
    o = parse("(1+2j)*A[0,1]")
    assert o.conjugate() == parse("(1-2j)*Ac[0,1]")


def test_particle_variables_are_covariant(lat26):
    part = free_particle(1.0, (0.1, 0, 0), x=(1.0, 2.0, 3.0, 4.0))
    s = SystemState(part, FieldState.zeros(lat26))
    assert O.x_obs(1).evaluate(s) == -2.0
    assert O.x_obs(0).evaluate(s) == 1.0
    assert O.p_obs(1).evaluate(s) == pytest.approx(part.p[1])


def test_out_of_range_mode(lat26):
    with pytest.raises(IndexError):
        O.amp(99, 0).evaluate(FieldState.zeros(lat26))


def test_potential_and_theta_observables(lat26, rng):
    f = O.random_state(rng, lat26)
    x = rng.normal(size=4)
    A = reconstruct_potential(f, x)
    th = conjugate_momentum(f, x)
    for mu in range(4):
        assert O.potential_obs(lat26, mu, x).evaluate(f) == pytest.approx(A[mu], rel=1e-12, abs=1e-14)
        for lam in range(4):
            assert O.theta_obs(lat26, lam, mu, x).evaluate(f) == pytest.approx(th[lam, mu], rel=1e-12, abs=1e-14)


def test_canonical_observables(lat26, rng):
    f = O.random_state(rng, lat26)
    x = rng.normal(size=4)
    cs = to_canonical(f, x)
    assert O.q_obs(lat26, 4, 2, x).evaluate(f) == pytest.approx(cs.q[4, 2], rel=1e-12)
    assert O.s_obs(lat26, 4, 2, x).evaluate(f) == pytest.approx(cs.s[4, 2], rel=1e-12)
    assert O.pi_obs(lat26, 4, 1, 2, x).evaluate(f) == pytest.approx(cs.pi(4)[1, 2], rel=1e-12)


def test_fd_gradient_matches_exact(lat26, rng):
    f = O.random_state(rng, lat26)
    o = O.random_polynomial(rng, 3, n_terms=5, degree=3)
    g = o.gradient(f)
    black = GenericObservable(o.evaluate, fd_step=1e-5)
    for v in list(g)[:6]:
        assert O.fd_gradient(black, f, v) == pytest.approx(g[v], rel=1e-7, abs=1e-9)


def test_fd_gradient_particle(lat26):
    part = free_particle(1.0, (0.2, 0, 0), x=(0.5, 1.0, -1.0, 2.0))
    s = SystemState(part, FieldState.zeros(lat26))
    o = parse("x[1]*x[1]*p[0]")
    g = o.gradient(s)
    black = GenericObservable(o.evaluate)
    for v in g:
        assert O.fd_gradient(black, s, v) == pytest.approx(g[v], rel=1e-8)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_ring_laws(seed):
    r = np.random.default_rng(seed)
    a, b, c = (O.random_polynomial(r, 2, 3, 2, particle=True) for _ in range(3))
    assert _close(a * (b + c), a * b + a * c)
    assert _close(a * b, b * a)


def _close(p, q):
    d = p - q
    return all(abs(c) < 1e-12 for c in d.terms.values())
