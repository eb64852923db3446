import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from contactkam import model as M
from contactkam.errors import PreconditionError
from contactkam.experiments import (ExperimentReport, MalformedReport, discount_limit, discount_profile,
                                   e2_closed_form, extrapolate_zero, property_suite, run_e1, run_e2)
from contactkam.model import TrigPoly

TWO_PI = 2 * math.pi


def _find(rep, text):
    hits = [c for c in rep.checks if text in c.description]
    assert hits, f"no check mentions {text!r}"
    return hits


def test_report_requires_provenance():
    rep = ExperimentReport("demo")
    with pytest.raises(MalformedReport):
        rep.check("untagged", 1.0, 1.0, 0.1, "")
    with pytest.raises(MalformedReport):
        rep.check("wrong tag", 1.0, 1.0, 0.1, "folklore: everybody knows")
    assert rep.check("ok", 1.0, 1.05, 0.1, "trivial: demo").passed
    assert not rep.check("le", 0.0, 0.2, 0.1, "derived: demo", relation="le").passed
    assert rep.check("ge", 1.0, 0.95, 0.1, "derived: demo", relation="ge").passed
    assert not rep.check("nan", 0.0, float("nan"), 1.0, "trivial: demo").passed
    assert not rep.passed and len(rep.failures) == 2


def test_report_json_is_deterministic(tmp_path):
    rep = ExperimentReport("demo", {"b": 0.1 + 0.2, "a": np.float64(1 / 3)})
    rep.check("third", 1 / 3, np.float64(1 / 3), 1e-12, "analytic: arithmetic")
    rep.tables["t"] = "x,value\n0,1\n"
    doc = json.loads(rep.to_json())
    assert list(doc) == ["checks", "name", "params"]
    assert doc["params"]["b"] == 0.3
    a = rep.write(str(tmp_path / "a"))
    b = rep.write(str(tmp_path / "b"))
    assert [open(p).read() for p in a] == [open(p).read() for p in b]
    assert rep.summary().startswith("PASS  third")


def test_e2_closed_form_solves_the_equation():
    # v' = -sqrt(-2 f v) on (0, 1/2) with f = 1 - cos 2 pi x; check by finite differences
    x = np.linspace(0.05, 0.45, 81)
    v = e2_closed_form(-1.0, x)
    h = 1e-6
    dv = (e2_closed_form(-1.0, x + h) - e2_closed_form(-1.0, x - h)) / (2 * h)
    f = 1 - np.cos(2 * np.pi * x)
    assert np.max(np.abs(0.5 * dv ** 2 + f * v)) < 1e-6
    assert e2_closed_form(-1.0, 0.0) == pytest.approx(-1.0)
    assert np.all(e2_closed_form(-1.0, np.linspace(0, 1, 101)) <= 0)


def test_run_e2_structure():
    rep = run_e2(grid=128, dt=0.01, include_zero=False, structure=False)
    assert rep.passed, rep.summary()
    for u in (-0.5, -1.0):
        assert _find(rep, f"v[{u:g}] takes the value")[0].observed == pytest.approx(u, abs=5e-3)
        assert _find(rep, f"v[{u:g}] Aubry estimate misses")[0].observed >= 0.1
    assert {"v_-0.5", "v_-1", "aubry_-1"} <= set(rep.tables)
    assert rep.tables["v_-1"].splitlines()[0].startswith("x,")


def test_run_e2_rejects_bad_coupling():
    with pytest.raises(PreconditionError):
        run_e2(f="sin", grid=64, dt=0.02)


def test_run_e1_second_harmonic():
    V = TrigPoly(0.0, (), (1.0, 0.3), TWO_PI)
    zs = sorted(brentq(lambda x: math.sin(x) + 0.3 * math.sin(2 * x), a, b) for a, b in ((-0.5, 0.5), (2.5, 3.5)))
    assert sorted(V.zeros()) == pytest.approx([abs(z) for z in zs], abs=1e-9)
    rep = run_e1(V=V, grid=256, dt=0.01, tol=1.5e-2, structure=False)
    assert rep.passed, rep.summary()
    strong = rep.artifacts["strong"]
    assert len(strong) > 0


def test_run_e1_rejects_three_zero_drift():
    with pytest.raises(PreconditionError):
        run_e1(V=TrigPoly(0.0, (), (0.0, 1.0), TWO_PI), grid=64, dt=0.05)


def test_discount_profile_routes_agree():
    V = TrigPoly(0.0, (), (1.0,), TWO_PI)
    prof = discount_profile(V, 0.1, 0.0, math.pi)
    assert prof.value_x2 == pytest.approx(prof.quadrature_x2, abs=1e-4)
    assert prof.closure < 1e-6
    # the profile is a nonpositive dip between the two zeros
    assert prof.v.max() <= 1e-12 and prof.v.min() == pytest.approx(prof.value_x2, abs=1e-9)


def test_extrapolation_models():
    lams = np.array([0.02, 0.01])
    vals = -4.0 + 3.0 * lams
    assert extrapolate_zero(lams, vals, "linear") == pytest.approx(-4.0)
    vals = -4.0 + 2.0 * lams * np.log(lams)
    assert extrapolate_zero(lams, vals, "lambda_log") == pytest.approx(-4.0)
    vals = -4.0 + 0.5 * np.sqrt(lams)
    assert extrapolate_zero(lams, vals, "sqrt") == pytest.approx(-4.0)


def test_discount_limit():
    rep = discount_limit(cross_validate=False)
    assert rep.passed, rep.summary()
    lim = _find(rep, "extrapolated")[0]
    assert lim.observed == pytest.approx(-4.0, abs=0.05)
    assert "values" in rep.tables


def test_e2_property_suite_comparison(e2_solutions):
    rep = property_suite(M.e2(), seeds=0, grid=128, dt=0.01, solutions=list(e2_solutions.values()))
    comp = _find(rep, "comparison")
    assert all(c.passed for c in comp)
    assert all(c.passed for c in _find(rep, "partial order"))


def test_classical_suite_strongly_static_equals_static():
    rep = property_suite(M.classical_quadratic(), seeds=0, grid=128, dt=0.05)
    hits = _find(rep, "strongly static estimate equals the Aubry estimate")
    assert all(c.passed for c in hits)
