import math

import numpy as np
import pytest

from smflow import lemmas, sphere, verify


def transport_pair_ratio(L):
    """Pseudo-distance ratio for a unit normal vector and its own transport at distance L.

    Along that pair the Jacobi field has normal part a0 cos(Ls) + a0 tan(L/2) sin(Ls),
    whose s-derivative has L2 norm L / cos(L/2) * sqrt(1/2 - sin(L) / (2L)); the
    transport pseudo-distance is 0 and |X1| + |X2| = 2.
    """
    dj = L / math.cos(L / 2) * math.sqrt(0.5 - math.sin(L) / (2 * L))
    return dj / (2 * L)


def test_sampler_shapes_and_closeness():
    s = lemmas.sample_pairs(np.random.default_rng(0), 300)
    assert s.p.shape == s.X2.shape == (300, 3)
    assert np.all(s.d < 0.25)
    assert np.max(np.abs(sphere.inner(s.q, s.X2))) < 1e-12
    # a third of the pairs are exact transports
    exact = sphere.pseudo_dist_transport(s.p, s.X1, s.q, s.X2)[::3]
    assert np.max(exact) < 1e-12


def test_pseudo_distance_constant_approaches_transport_pair_supremum():
    C = lemmas.fit_pseudo_distance_constant(0, 10_000)
    sup = transport_pair_ratio(0.25)
    assert 0.95 * sup < C <= sup * (1 + 1e-9)


def test_hessian_constant_and_fresh_sample():
    C = lemmas.fit_hessian_constant(0)
    assert 0.25 < C / lemmas.HEADROOM < 0.26
    assert lemmas.hessian_bound_violations(C, 7) == 0


def test_observed_order():
    assert verify.observed_order([1.0, 0.25, 0.0625]) == pytest.approx(2.0)
    assert verify.observed_order([1.0, 0.0]) == math.inf


def test_octant_holonomy_is_quarter_turn():
    angle, predicted = verify.octant_holonomy()
    assert angle == pytest.approx(math.pi / 2, abs=1e-13)
    assert predicted == pytest.approx(math.pi / 2)
    assert verify.octant_holonomy(-1.0)[1] == pytest.approx(-math.pi / 2)


def test_suite_filter_and_unknown_suite():
    checks = verify.run_checks("hessian")
    assert {c.suite for c in checks} == {"hessian"}
    assert all(c.passed for c in checks)
    with pytest.raises(KeyError):
        verify.run_checks("nope")


def test_check_line_format():
    c = verify._check("x", "s", 0.5, 1.0, "<=")
    assert c.passed and c.line().endswith("PASS")
    assert not verify._check("x", "s", float("nan"), 1.0, "<=").passed
