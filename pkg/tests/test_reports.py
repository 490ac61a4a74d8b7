import math

import pytest
from hypothesis import given, strategies as st
from pydantic import ValidationError

from plaplace.reports import CheckResult, EstimateReport, RunReport

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def sample_report(lhs=1.0, rhs=2.0):
    est = EstimateReport(name="estimate9", lhs=lhs, rhs=rhs, grid_tag="64x64",
                         params={"p": 3.0, "zeta_center": [0.0]}, extra={"bulk_term": 0.5})
    chk = CheckResult(name="estimate9", rule="drift < 0.05", passed=True,
                      rows=[{"nx": 64, "ratio": est.ratio}], reports=[est], notes=["ok"])
    return RunReport(command="verify", config={"seed": 0}, checks=[chk], tables={"t": [{"a": 1}]})


def test_ratio_filled_in():
    assert EstimateReport(name="a", lhs=1.0, rhs=4.0).ratio == 0.25
    assert EstimateReport(name="a", lhs=1.0, rhs=0.0).ratio is None
    assert EstimateReport(name="a", lhs=4.0, rhs=2.2250738585072014e-308).ratio is None


@given(finite, finite)
def test_round_trip_is_byte_stable(lhs, rhs):
    rep = sample_report(lhs, rhs)
    text = rep.dumps()
    back = RunReport.loads(text)
    assert back == rep
    assert back.dumps() == text


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_rejected(bad):
    with pytest.raises(ValidationError):
        EstimateReport(name="a", lhs=bad, rhs=1.0)
    with pytest.raises(ValidationError):
        EstimateReport(name="a", lhs=1.0, rhs=1.0, extra={"x": bad})
    with pytest.raises(ValidationError):
        EstimateReport(name="a", lhs=1.0, rhs=1.0, ratio=bad)
    with pytest.raises(ValidationError):
        CheckResult(name="c", rule="r", passed=False, rows=[{"v": bad}])


def test_extra_keys_rejected():
    with pytest.raises(ValidationError):
        EstimateReport(name="a", lhs=1.0, rhs=1.0, surprise=3)
    text = sample_report().dumps().replace('"command"', '"unexpected": 1, "command"', 1)
    with pytest.raises(ValidationError):
        RunReport.loads(text)


def test_passed_aggregates():
    rep = sample_report()
    assert rep.passed
    rep.checks.append(CheckResult(name="x", rule="r", passed=False))
    assert not rep.passed
