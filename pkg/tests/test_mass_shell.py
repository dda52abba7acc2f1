import numpy as np
import pytest

from covbracket.mass_shell import (boost_lattice, boost_mode, build_lattice, measure_sum,
                                   shell_residual, tetrad_for)
from covbracket.minkowski import ETA, boost
from covbracket.summation import NonFiniteError, fsum


def test_lattice_size_and_order():
    lat = build_lattice(1.0, 1)
    assert len(lat) == 26
    assert tuple(lat.indices[0]) == (-1, -1, -1)
    assert not np.any(np.all(lat.indices == 0, axis=1))
    assert len(build_lattice(0.5, 6)) == 13 ** 3 - 1


def test_weights_and_shell():
    lat = build_lattice(0.5, 2)
    assert np.allclose(lat.w, 0.125 / (2 * lat.k0))
    assert shell_residual(lat).max() < 1e-13


def test_axis_mode_weight():
    lat = build_lattice(1.0, 1)
    j = [tuple(t) for t in lat.indices].index((0, 0, 1))
    assert lat.w[j] == 0.5


@pytest.mark.parametrize("dk,n", [(0.0, 1), (-1.0, 1), (1.0, 0), (1.0, 1.5)])
def test_invalid_lattice(dk, n):
    with pytest.raises(ValueError):
        build_lattice(dk, n)


def test_tetrad_orthonormal():
    lat = build_lattice(1.0, 2)
    for tet in lat.tetrads:
        g = tet @ ETA @ tet.T
        assert np.allclose(g, ETA, atol=1e-14)


def test_tetrad_longitudinal_along_k():
    k = np.array([0.3, -1.2, 0.5])
    t = tetrad_for(k)
    assert np.allclose(t[3, 1:], k / np.linalg.norm(k))
    with pytest.raises(ValueError):
        tetrad_for([0, 0, 0])


def test_tetrad_tie_break_first_axis():
    t = tetrad_for([0.0, 0.0, 1.0])
    assert np.allclose(t[1, 1:], [1, 0, 0])


def test_measure_sum_matches_direct():
    lat = build_lattice(1.0, 2)
    assert measure_sum(lat, np.ones(len(lat))) == pytest.approx(np.sum(lat.w), rel=1e-15)
    assert measure_sum(lat, lambda L: L.k0) == pytest.approx(0.5 * len(lat), rel=1e-14)


def test_measure_sum_nonfinite():
    lat = build_lattice(1.0, 1)
    vals = np.ones(len(lat))
    vals[3] = np.nan
    with pytest.raises(NonFiniteError):
        measure_sum(lat, vals)


def test_fsum_order_independent(rng):
    v = rng.normal(size=1000) * 10.0 ** rng.integers(-8, 8, size=1000)
    assert fsum(v) == fsum(v[::-1]) == fsum(rng.permutation(v))


def test_boost_mode_stays_null():
    lat = build_lattice(1.0, 1)
    m = boost_mode(boost("z", 0.8), lat.modes[5])
    assert abs(m.k0 ** 2 - m.k_spatial @ m.k_spatial) < 1e-13
    assert m.w == lat.w[5]


def test_invariant_integrand_on_boosted_points():
    # k.u for fixed timelike u: sum_j w f(L k) with f(k) = (k.u)^0 is trivially invariant
    lat = build_lattice(1.0, 2)
    blat = boost_lattice(boost("x", 0.3), lat)
    assert measure_sum(blat, np.ones(len(blat))) == pytest.approx(measure_sum(lat, np.ones(len(lat))))
