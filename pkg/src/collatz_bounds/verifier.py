"""Check the counting bounds the certificates imply against the 3x+1 map itself."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .certificate import Certificate
from .core import pi_a, pi_a_star
from .errors import CycleTarget

HEADLINE_EXPONENT = 0.84


@dataclass(frozen=True)
class BoundRow:
    y: int
    ceiling: int
    lhs: int
    rhs: Fraction

    @property
    def passed(self) -> bool:
        return self.lhs >= self.rhs


@dataclass
class BoundCheckReport:
    a: int
    k: int
    lam: Fraction
    delta1: Fraction
    rows: list[BoundRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def csv(self) -> str:
        lines = ["a,k,y,ceiling,lhs,rhs,pass"]
        lines += [
            f"{self.a},{self.k},{r.y},{r.ceiling},{r.lhs},{float(r.rhs):.9g},{int(r.passed)}"
            for r in self.rows
        ]
        return "\n".join(lines) + "\n"


def delta1(cert: Certificate) -> Fraction:
    """The constant ``1 / (4 max c)`` of the final lower bound."""
    return 1 / (4 * cert.c_max)


def check_lower_bound(a: int, cert: Certificate, y_max: int) -> BoundCheckReport:
    """Compare ``pi_a*(floor(2^y a))`` with ``delta1 * c[a mod 3^k] * lam^y``.

    The right side is exact: lambda and the certificate values are rational.
    """
    if a in (1, 2):
        raise CycleTarget(f"{a} lies on the cycle {{1, 2}}")
    if a < 1 or a % 3 != 2:
        raise ValueError(f"target must be = 2 (mod 3), got {a}")
    c = cert.principal[a % 3**cert.k]
    d1 = delta1(cert)
    report = BoundCheckReport(a, cert.k, cert.lam, d1)
    for y in range(y_max + 1):
        ceiling = (2**y) * a
        report.rows.append(BoundRow(y, ceiling, pi_a_star(a, ceiling), d1 * c * cert.lam**y))
    return report


@dataclass(frozen=True)
class HeadlineRow:
    x: int
    count: int
    bound: float

    @property
    def margin(self) -> float:
        return self.count / self.bound

    @property
    def passed(self) -> bool:
        return self.count >= self.bound


def check_theorem61(x_values, a: int = 1, exponent: float = HEADLINE_EXPONENT, budget: int = 10_000) -> list[HeadlineRow]:
    """``pi_a(x)`` by direct iteration against ``x**exponent``."""
    rows = []
    for x in x_values:
        x = int(x)
        rows.append(HeadlineRow(x, pi_a(a, x, budget=budget), x**exponent))
    return rows


def headline_csv(rows: list[HeadlineRow]) -> str:
    lines = ["x,pi_1,x^0.84,ratio,pass"]
    lines += [f"{r.x},{r.count},{r.bound:.6f},{r.margin:.6f},{int(r.passed)}" for r in rows]
    return "\n".join(lines) + "\n"
