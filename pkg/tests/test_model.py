import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from contactkam import model as M
from contactkam.errors import ConfigurationError

finite = st.floats(-3, 3, allow_nan=False)


def test_hamiltonian_values():
    assert M.eval_H(M.e1(), 0.0, 0.0, 0.0) == pytest.approx(0.0)
    assert M.eval_H(M.e2(), 0.0, -1.0, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert M.eval_H(M.classical_quadratic(), 1.234, -7.0, 2.0) == pytest.approx(2.0)


def test_partials():
    hx, hu, hp = M.eval_H_partials(M.e1(), math.pi / 2, 0.0, 1.0)
    assert (hx, hu, hp) == pytest.approx((0.0, 1.0, 2.0), abs=1e-12)
    hx, hu, hp = M.eval_H_partials(M.e2(), 0.0, -0.7, 0.4)
    assert (hx, hu, hp) == pytest.approx((0.0, 0.0, 0.4), abs=1e-12)
    assert M.eval_H_partials(M.classical_quadratic(), 1.0, 2.0, 3.0) == pytest.approx((0.0, 0.0, 3.0))


def test_lagrangian_closed_forms():
    assert M.eval_L(M.e1(), 0.0, 0.0, 1.0) == pytest.approx(0.5)
    assert M.eval_L(M.e2(), 0.3, 0.0, 1.7) == pytest.approx(0.5 * 1.7 ** 2)


def test_custom_lagrangian_by_numerical_conjugate():
    m = M.custom(lambda x, u, p: 0.5 * np.asarray(p) ** 2)
    assert M.eval_L(m, 0.1, 0.0, 3.0) == pytest.approx(4.5, abs=1e-8)


@given(x=st.floats(0, 2 * math.pi), u=finite, v=finite)
def test_custom_path_matches_affine_lagrangian(x, u, v):
    e = M.e1(0.7)
    c = M.custom(lambda x, u, p: 0.7 * np.asarray(u) + 0.5 * np.asarray(p) ** 2 + np.asarray(p) * np.sin(x),
                 lam=0.7)
    assert M.eval_L(c, x, u, v) == pytest.approx(float(M.eval_L(e, x, u, v)), abs=1e-7)


@given(x=st.floats(0, 2 * math.pi), u=finite, p=finite)
def test_legendre_duality(x, u, p):
    m = M.e1()
    v = M.velocity(m, x, u, p)
    assert M.momentum(m, x, u, v) == pytest.approx(p, abs=1e-9)
    # Fenchel equality H + L = p v at the dual pair
    assert M.eval_H(m, x, u, p) + M.eval_L(m, x, u, v) == pytest.approx(p * v, abs=1e-9)


def test_audit():
    a = M.audit_assumptions(M.e1(), ((0, 2 * math.pi), (-2, 2), (-3, 3)))
    assert a.passed and a.min_d2H_dp2 == pytest.approx(1.0)
    assert a.dH_du_min == pytest.approx(1.0) and a.dH_du_max == pytest.approx(1.0)
    b = M.audit_assumptions(M.e2(lam=1.0))
    assert not b.passed and b.required_lambda == pytest.approx(2.0, abs=1e-6)
    assert M.e2().lam == pytest.approx(2.0)
    assert M.audit_assumptions(M.classical_quadratic()).passed


def test_descriptor_roundtrip_and_errors(tmp_path):
    m = M.e1(0.5, [0.0, 0.0, 1.0, 0.0, 0.3])
    p = tmp_path / "m.json"
    p.write_text(json.dumps(m.descriptor()))
    assert M.load_model(str(p)) == m
    assert M.load_model("e2") == M.e2()
    with pytest.raises(ConfigurationError):
        M.from_descriptor({"kind": "nope"})
    with pytest.raises(ConfigurationError):
        M.from_descriptor({"kind": "E1", "colour": 1})
    with pytest.raises(ConfigurationError):
        M.e1(period=-1.0)


def test_trig_zeros():
    V = M.TrigPoly.parse([0.0, 0.0, 1.0, 0.0, 0.3], 2 * math.pi)
    zs = V.zeros()
    assert len(zs) == 2
    assert zs[0] == pytest.approx(0.0, abs=1e-10) and zs[1] == pytest.approx(math.pi, abs=1e-10)


def test_reflected_model():
    m = M.e1()
    r = M.reflected(m)
    assert M.eval_H(r, 0.4, 0.3, -0.2) == pytest.approx(M.eval_H(m, 0.4, -0.3, 0.2))
    assert M.from_descriptor(r.descriptor()) == r
    assert M.load_model(json.dumps(r.descriptor())).u_monotonicity is M.UMonotonicity.LIPSCHITZ
