import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from contactkam import model as M
from contactkam.errors import BlowUpError, PreconditionError
from contactkam.flow import (ContactState, Orbit, energy, flow_pseudograph, integrate, integrate_many,
                             orbit_residual, step)


def test_step_examples():
    s = step(M.e1(), ContactState(0, 0, 0), 0.1)
    assert s.as_tuple() == pytest.approx((0, 0, 0))
    s = step(M.classical_quadratic(), ContactState(0, 0, 1), 0.5)
    assert s.as_tuple() == pytest.approx((0.5, 0.25, 1.0), abs=1e-14)
    s = integrate(M.e1(), ContactState(math.pi / 2, 1.0, 0.0), 1.0, 1e-3)
    assert s.u[-1] == pytest.approx(math.exp(-1), abs=1e-6)


def test_fixed_points_stay_put():
    o = integrate(M.e1(), ContactState(math.pi, 0, 0), 10, 0.01)
    assert np.allclose(o.x, math.pi) and np.allclose(o.u, 0) and np.allclose(o.p, 0)
    o = integrate(M.e2(), ContactState(0, -1, 0), 5, 0.01)
    assert np.allclose(o.x % 1.0, 0) and np.allclose(o.u, -1) and np.allclose(o.p, 0)
    assert orbit_residual(M.e2(), o) <= 1e-12


def test_drift_orbit_matches_scalar_ode():
    o = integrate(M.e1(), ContactState(math.pi / 2, 0, 0), 8, 0.01)
    # exact solution of x' = sin x: tan(x/2) = tan(x0/2) e^t
    exact = 2 * np.arctan(np.tan(math.pi / 4) * np.exp(o.times))
    assert np.max(np.abs(o.x - exact)) < 1e-8
    assert np.all(np.diff(o.x) > 0) and np.allclose(o.u, 0) and np.allclose(o.p, 0)


def test_residual_detects_corruption():
    fine = [orbit_residual(M.e1(), integrate(M.e1(), ContactState(1.0, 0.2, 0.3), 2, h)) for h in (2e-3, 1e-3)]
    # centred differences of an RK4 orbit: residual shrinks like dt^2
    assert fine[0] / fine[1] == pytest.approx(4.0, rel=0.1)
    o = integrate(M.e1(), ContactState(1.0, 0.2, 0.3), 2, 1e-2)
    x = np.array(o.x)
    x[50] += 0.1
    bad = Orbit(o.t0, o.dt, x, o.u, o.p, o.period)
    assert orbit_residual(M.e1(), bad) >= 0.01


def test_rk4_order():
    m = M.e1()
    s0 = ContactState(1.0, 0.3, 0.4)
    ref = integrate(m, s0, 1.0, 1e-3)
    errs = [abs(integrate(m, s0, 1.0, h).u[-1] - ref.u[-1]) for h in (0.1, 0.05)]
    assert math.log2(errs[0] / errs[1]) > 3.8


def test_pseudograph_flow_invariance():
    m = M.e1()
    xs = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    img = flow_pseudograph(m, [ContactState(x, 0, 0) for x in xs], -5.0)
    ys = np.array([s.x for s in img.states])
    # the zero section maps onto itself (points slide towards 0 backward in time)
    assert np.allclose([s.u for s in img.states], 0) and np.allclose([s.p for s in img.states], 0)
    assert not any(img.blown_up) and ys.shape == xs.shape
    img0 = flow_pseudograph(m, [ContactState(1.0, 2.0, 3.0)], 0.0)
    assert img0.states[0].as_tuple() == (1.0, 2.0, 3.0)
    img2 = flow_pseudograph(M.e2(), [ContactState(x / 64, 0, 0) for x in range(64)], -5.0)
    assert np.allclose([s.x for s in img2.states], np.arange(64) / 64)


def test_blow_up_and_preconditions():
    with pytest.raises(BlowUpError) as exc:
        integrate(M.reflected(M.e1()), ContactState(1.0, 1.0, 0.0), 20.0, 0.01)
    assert exc.value.orbit.blown_up and 13 < exc.value.time < 15
    with pytest.raises(PreconditionError):
        integrate(M.e1(), ContactState(0, 0, 0), 0.0, 0.1)
    with pytest.raises(PreconditionError):
        step(M.e1(), ContactState(0, 0, 0), 0.0)


@given(x=st.floats(0, 6.28), u=st.floats(-1, 1), p=st.floats(-1, 1))
def test_energy_decays_at_rate_coupling(x, u, p):
    # dH/dt = -H_u H along contact orbits; for E1 H(t) = H(0) e^{-t}
    m = M.e1()
    o = integrate(m, ContactState(x, u, p), 1.0, 0.01)
    H = energy(m, o)
    assert H[-1] == pytest.approx(H[0] * math.exp(-1.0), abs=1e-7)


def test_integrate_many_matches_single():
    m = M.e1()
    X, U, P, alive = integrate_many(m, [0.5, 2.0], [0.1, -0.2], [0.3, 0.0], 2.0, 0.01)
    o = integrate(m, ContactState(2.0, -0.2, 0.0), 2.0, 0.01)
    assert alive.all() and np.allclose(X[1], o.x) and np.allclose(U[1], o.u)
