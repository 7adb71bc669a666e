import logging
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from collatz_bounds.certificate import check_certificate
from collatz_bounds.core import classes
from collatz_bounds.errors import PrecisionExhausted
from collatz_bounds.lp import build_lp_nt
from collatz_bounds.solver import (
    Feasible,
    Infeasible,
    NTOperator,
    OperatorState,
    Undetermined,
    averages,
    decide,
    eval_operator,
    power_iterate,
    principal_slacks,
    search_lambda,
    summed_inequality_holds,
    table2_row,
)

log = logging.getLogger(__name__)


@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_operator_at_one(k):
    out = eval_operator(OperatorState(k, np.ones(3 ** (k - 1))), 1.0).c
    expected = {2: 2.0, 5: 1.0, 8: 2.0}
    assert list(out) == [expected[m % 9] for m in classes(k)]


def test_operator_state_validation():
    with pytest.raises(ValueError):
        OperatorState(2, np.ones(4))
    with pytest.raises(ValueError):
        OperatorState(2, np.array([1.0, 0.0, 1.0]))


def test_operator_matches_formula():
    k, lam = 3, 1.4
    alpha = np.log2(3)
    c = np.arange(1.0, 10.0)
    out = eval_operator(OperatorState(k, c), lam).c
    val = dict(zip(classes(k), c))

    def min_lifts(m):
        m %= 9
        return min(val[m], val[m + 9], val[m + 18])

    for m, got in zip(classes(k), out):
        want = lam**-2 * val[(4 * m) % 27]
        if m % 9 == 2:
            want += lam ** (alpha - 2) * min_lifts((4 * m - 2) // 3)
        elif m % 9 == 8:
            want += lam ** (alpha - 1) * min_lifts((2 * m - 1) // 3)
        assert got == pytest.approx(want, rel=1e-14)


vectors = st.integers(2, 4).flatmap(
    lambda k: st.tuples(
        st.just(k),
        st.lists(st.floats(0.01, 100.0), min_size=3 ** (k - 1), max_size=3 ** (k - 1)),
        st.lists(st.floats(0.0, 10.0), min_size=3 ** (k - 1), max_size=3 ** (k - 1)),
        st.floats(1.0, 2.0),
    )
)


@settings(max_examples=200, deadline=None)
@given(vectors)
def test_operator_monotone(data):
    k, c, bump, lam = data
    c, bump = np.array(c), np.array(bump)
    low = eval_operator(OperatorState(k, c), lam).c
    high = eval_operator(OperatorState(k, c + bump), lam).c
    assert np.all(high >= low)


@settings(max_examples=200, deadline=None)
@given(vectors, st.floats(0.001, 1000.0))
def test_operator_homogeneous(data, t):
    k, c, _, lam = data
    c = np.array(c)
    base = eval_operator(OperatorState(k, c), lam).c
    scaled = eval_operator(OperatorState(k, t * c), lam).c
    np.testing.assert_allclose(scaled, t * base, rtol=1e-12)


def test_power_iterate_trivial():
    out = power_iterate(2, 1.0)
    assert isinstance(out, Feasible)
    assert set(out.certificate.principal.values()) == {Fraction(1)}


def test_power_iterate_examples():
    assert isinstance(power_iterate(2, 1.35), Feasible)
    out = power_iterate(2, 1.4)
    assert isinstance(out, Infeasible)
    assert out.theta < 1


def test_power_iterate_undetermined():
    # one sweep is not enough to separate this close to the threshold
    out = power_iterate(2, Fraction(13534001, 10**7), max_iter=0, check_every=1)
    assert isinstance(out, Undetermined)


def test_infeasible_vector_certifies_contraction():
    out = power_iterate(3, 1.6)
    assert isinstance(out, Infeasible)
    u = out.vector
    fu = NTOperator.for_level(3).apply(u, (1.6**-2, 1.6 ** (np.log2(3) - 2), 1.6 ** (np.log2(3) - 1)))
    assert np.all(fu <= float(out.theta) * u * (1 + 1e-12))


def test_power_iterate_rejects_lambda():
    with pytest.raises(ValueError):
        power_iterate(2, 2.5)


def test_escalation_and_exhaustion():
    narrow = search_lambda(2, 2**-70)
    assert narrow.certificate.precision_bits > 64
    assert check_certificate(build_lp_nt(2), narrow.certificate)
    with pytest.raises(PrecisionExhausted):
        search_lambda(2, 2**-70, max_precision_bits=64)


def test_search_bracket_k2():
    res = search_lambda(2, 1e-6, keep_certificates=True)
    assert res.lam_lo < res.lam_hi
    assert res.lam_hi - res.lam_lo <= Fraction(1, 10**6)
    assert abs(float(res.lam_lo) - 1.3534010) <= 1e-3
    assert abs(res.gamma - 0.4365880) <= 1e-3
    width = None
    lo, hi = Fraction(1), Fraction(2)
    for lam, verdict in res.history[2:]:
        if verdict == "feasible":
            assert lam > lo
            lo = lam
        else:
            assert lam < hi
            hi = lam
        assert width is None or hi - lo < width
        width = hi - lo
    assert (lo, hi) == (res.lam_lo, res.lam_hi)
    assert [c.lam for c in res.lo_certificates][-1] == res.lam_lo
    assert res.theta_hi < 1


def test_checkpoint_resume(tmp_path):
    path = tmp_path / "k3.json"
    coarse = search_lambda(3, 1e-3, checkpoint=path)
    assert path.exists()
    resumed = search_lambda(3, 1e-7, checkpoint=path)
    fresh = search_lambda(3, 1e-7)
    assert (resumed.lam_lo, resumed.lam_hi) == (fresh.lam_lo, fresh.lam_hi)
    assert resumed.lam_lo >= coarse.lam_lo
    assert len(resumed.history) < len(fresh.history)


def test_checkpoint_other_level_ignored(tmp_path):
    path = tmp_path / "ck.json"
    search_lambda(2, 1e-3, checkpoint=path)
    res = search_lambda(3, 1e-3, checkpoint=path)
    assert abs(float(res.lam_lo) - 1.5275960) < 1e-3


@pytest.mark.parametrize("k", [2, 3, 4])
def test_no_feasibility_islands(k):
    verdicts = []
    for i in range(101):
        lam = Fraction(100 + i, 100)
        verdicts.append(isinstance(decide(k, lam), Feasible))
    first_bad = verdicts.index(False)
    assert not any(verdicts[first_bad:])
    assert all(verdicts[:first_bad])


def test_averages_and_summed_inequality():
    res = search_lambda(2, 1e-6)
    av = averages(res.certificate)
    assert float(av.difference) == pytest.approx(0.5237640, abs=1e-3)
    assert summed_inequality_holds(res.certificate)
    row = table2_row(res)
    assert row.summed_ok
    assert row.csv().startswith("2,0.43658")


@pytest.mark.parametrize("k", [2, 3, 4, 5, 6])
def test_tightness_observation(k):
    """Slack of the principal constraints near lambda_lo; recorded, not asserted."""
    res = search_lambda(k, 1e-6)
    slack = principal_slacks(res.certificate)
    log.info("k=%d max relative slack at lambda_lo: %.3g", k, float(slack.max()))
    assert np.all(slack >= -1e-12)
