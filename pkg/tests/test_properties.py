import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from fockconc import concentration as C
from fockconc import highdim as H
from fockconc import stability as S
from fockconc import transforms as Tr
from fockconc.fock import dumps, evaluate, inner, kernel_function, loads, make_fock

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
coeff_lists = st.lists(st.builds(complex, finite, finite), min_size=1, max_size=10)


@given(coeff_lists)
def test_text_round_trip(cs):
    F = make_fock(1, cs)
    assert np.array_equal(loads(dumps(F)).dense(), F.dense())


@given(coeff_lists, st.floats(-1.2, 1.2), st.floats(-1.2, 1.2))
def test_reproducing_identity(cs, x, y):
    F = make_fock(1, cs)
    z0 = complex(x, y)
    lhs = inner(F, kernel_function(z0, 50))
    rhs = evaluate(F, z0) * math.exp(-math.pi * abs(z0) ** 2 / 2)
    assert abs(lhs - rhs) <= 1e-11 * max(1.0, math.sqrt(F.norm_sq()))


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=12), st.floats(0.01, 8))
def test_second_variation_bound(tail, s):
    a = np.zeros(len(tail) + 2)
    a[2:] = tail
    G = make_fock(1, a)
    assert S.second_variation(G, s) <= -s * math.exp(-s) * G.norm_sq() * (1 - 1e-12)


@given(st.integers(2, 20), st.floats(0.0, 20))
def test_v_coefficient_sandwich(k, s):
    v = S.v_coefficient(k, s)
    assert -1.0 <= v <= 0.0
    assert S.v_coefficient(k + 1, s) <= v


@given(st.floats(0, 30), st.floats(0, 30), st.integers(1, 4))
def test_bound_monotone(a, b, d):
    lo, hi = sorted((a, b))
    assert 0.0 <= H.fk_bound_d(lo, d) <= H.fk_bound_d(hi, d) <= 1.0


@given(st.lists(st.builds(complex, finite, finite), min_size=1, max_size=30))
def test_bargmann_unitary(cs):
    c = np.array(cs)
    F = Tr.bargmann(Tr.HermiteExpansion(c, 0.0))
    assert abs(F.norm_sq() - float(np.sum(np.abs(c) ** 2))) <= 1e-12 * max(1.0, F.norm_sq())


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.builds(complex, st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=6).filter(
        lambda v: sum(abs(x) ** 2 for x in v) > 1e-3
    ),
    st.floats(-1, 1),
    st.floats(-1, 1),
    st.floats(0.1, 3),
)
def test_fk_on_discs(cs, cx, cy, area):
    F = make_fock(1, cs)
    spec = C.GridSpec(C.default_radius(F.max_degree), 128)
    rep = C.deficit(F, C.disc_mask(spec, complex(cx, cy), area=area), spec)
    assert rep.deficit >= -rep.quad_err
