"""Exact time shifts of the form ``p + q*alpha`` with ``alpha = log2(3)``.

Every shift produced while building or eliminating inequality trees is an
integer combination of 1 and alpha, so shifts are stored as integer pairs and
compared exactly.  ``p + q*alpha >= 0`` holds iff ``2**p * 3**q >= 1``, which is
an integer comparison once the negative exponents are moved across.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering

ALPHA = math.log2(3)

# A float evaluation of p + q*alpha is trusted for the sign only outside this
# band; inside it the exact integer test decides.
_FLOAT_BAND = 1e-9


def _sign(p: int, q: int) -> int:
    approx = p + q * ALPHA
    if abs(approx) > _FLOAT_BAND * (1 + abs(p) + abs(q)):
        return 1 if approx > 0 else -1
    if p == 0 and q == 0:
        return 0
    lhs = (2 ** max(p, 0)) * (3 ** max(q, 0))
    rhs = (2 ** max(-p, 0)) * (3 ** max(-q, 0))
    # lhs == rhs would force p == q == 0 by unique factorisation
    return 1 if lhs > rhs else -1


@total_ordering
@dataclass(frozen=True, slots=True)
class ExponentShift:
    """The real number ``p + q*log2(3)``."""

    p: int = 0
    q: int = 0

    def __add__(self, other: ExponentShift) -> ExponentShift:
        return ExponentShift(self.p + other.p, self.q + other.q)

    def __sub__(self, other: ExponentShift) -> ExponentShift:
        return ExponentShift(self.p - other.p, self.q - other.q)

    def __neg__(self) -> ExponentShift:
        return ExponentShift(-self.p, -self.q)

    def __lt__(self, other: ExponentShift) -> bool:
        if not isinstance(other, ExponentShift):
            return NotImplemented
        return _sign(self.p - other.p, self.q - other.q) < 0

    def sign(self) -> int:
        return _sign(self.p, self.q)

    @property
    def advanced(self) -> bool:
        """True for shifts ``>= 0`` (terms that look forward in time)."""
        return _sign(self.p, self.q) >= 0

    def __float__(self) -> float:
        return self.p + self.q * ALPHA

    def __str__(self) -> str:
        if self.q == 0:
            return str(self.p)
        a = {1: "α", -1: "-α"}.get(self.q, f"{self.q}α")
        if self.p == 0:
            return a
        return f"{a}{self.p:+d}"


ZERO = ExponentShift(0, 0)
# Shift contributed by each kind of step in the base inequalities.
STEP_DIRECT = ExponentShift(-2, 0)
STEP_D1_MIN = ExponentShift(-2, 1)
STEP_D3_MIN = ExponentShift(-1, 1)
