from fractions import Fraction

import pytest

from collatz_bounds.certificate import trivial_certificate
from collatz_bounds.core import pi_a_star
from collatz_bounds.errors import BudgetExceeded, CycleTarget
from collatz_bounds.solver import Feasible, power_iterate, search_lambda
from collatz_bounds.verifier import check_lower_bound, check_theorem61, delta1, headline_csv


@pytest.fixture(scope="module")
def cert135():
    out = power_iterate(2, Fraction(135, 100))
    assert isinstance(out, Feasible)
    return out.certificate


def test_bound_a5(cert135):
    report = check_lower_bound(5, cert135, 15)
    assert report.passed
    assert [r.y for r in report.rows] == list(range(16))
    assert report.rows[0].lhs >= 1 > report.delta1
    lhs = [r.lhs for r in report.rows]
    assert lhs == sorted(lhs)


def test_delta1_at_most_quarter(cert135):
    assert delta1(cert135) <= Fraction(1, 4)
    assert delta1(trivial_certificate(2)) == Fraction(1, 4)


def test_bound_row_values(cert135):
    row = check_lower_bound(11, cert135, 3).rows[3]
    assert row.ceiling == 88
    assert row.lhs == pi_a_star(11, 88)
    assert row.rhs == delta1(cert135) * cert135.principal[11 % 9] * Fraction(135, 100) ** 3


@pytest.mark.parametrize("a", [1, 2])
def test_cycle_targets(a, cert135):
    with pytest.raises(CycleTarget):
        check_lower_bound(a, cert135, 3)


def test_wrong_residue(cert135):
    with pytest.raises(ValueError):
        check_lower_bound(7, cert135, 3)


def test_bound_many_targets():
    cert = search_lambda(3, 1e-5).certificate
    for a in range(5, 101, 3):
        assert check_lower_bound(a, cert, 15).passed, a


def test_report_csv(cert135):
    text = check_lower_bound(5, cert135, 1).csv()
    assert text.splitlines()[0] == "a,k,y,ceiling,lhs,rhs,pass"
    assert text.splitlines()[1].startswith("5,2,0,5,2,")


def test_headline_small():
    rows = check_theorem61([10, 10**4])
    assert [r.count for r in rows] == [10, 10**4]
    assert all(r.passed for r in rows)
    assert headline_csv(rows).splitlines()[1].startswith("10,10,")


def test_headline_budget():
    with pytest.raises(BudgetExceeded):
        check_theorem61([100], budget=10)
