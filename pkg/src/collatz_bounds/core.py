"""The 3x+1 map, its inverse, the counting functions and residue classes mod 3^k."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum

from .errors import BudgetExceeded

# Trajectory values are Python ints, so nothing overflows silently; this
# ceiling makes the 128-bit contract explicit.
MAX_TRAJECTORY_VALUE = 2**128


def t_step(n: int) -> int:
    """One step of the 3x+1 map: ``n/2`` for even n, ``(3n+1)/2`` for odd n."""
    if n < 1:
        raise ValueError(f"t_step needs n >= 1, got {n}")
    if n % 2 == 0:
        return n // 2
    return (3 * n + 1) // 2


def preimages(n: int) -> set[int]:
    """All p >= 1 with ``t_step(p) == n``."""
    if n < 1:
        raise ValueError(f"preimages needs n >= 1, got {n}")
    out = {2 * n}
    if n % 3 == 2:
        out.add((2 * n - 1) // 3)
    return out


def _check_target(a: int) -> None:
    if a < 1 or a % 3 == 0:
        raise ValueError(f"target must be positive and not divisible by 3, got {a}")


def pi_a_star(a: int, x: int) -> int:
    """Count n <= x whose trajectory reaches ``a`` without ever exceeding ``x``.

    Backward breadth-first search from ``a`` over preimages, pruning nodes
    above ``x``.  The visited set guards the cycle {1, 2}.
    """
    _check_target(a)
    if x < a:
        return 0
    seen = {a}
    queue = deque([a])
    while queue:
        v = queue.popleft()
        for p in preimages(v):
            if p <= x and p not in seen:
                seen.add(p)
                queue.append(p)
    return len(seen)


def pi_a_star_forward(a: int, x: int) -> int:
    """Forward-scan version of :func:`pi_a_star`; quadratic, used as an oracle."""
    _check_target(a)
    count = 0
    for n in range(1, x + 1):
        v = n
        seen = set()
        while v <= x and v not in seen:
            if v == a:
                count += 1
                break
            seen.add(v)
            v = t_step(v)
    return count


def pi_a(a: int, x: int, budget: int = 10_000) -> int:
    """Count n <= x whose forward orbit visits ``a``.

    Each trajectory runs until it hits ``a``, a value whose answer is already
    known, or a value it has seen before.  ``budget`` caps the steps spent on
    a single trajectory; exceeding it raises :class:`BudgetExceeded` rather
    than guessing.
    """
    _check_target(a)
    if x < 1:
        return 0
    # known[v] for v <= x: 1 = visits a, 0 = does not, 0xFF = unresolved
    known = bytearray(b"\xff" * (x + 1))
    big: dict[int, int] = {}
    count = 0
    for n in range(1, x + 1):
        if known[n] == 0xFF:
            path = []
            on_path = set()
            v = n
            steps = 0
            while True:
                if v == a:
                    hit = 1
                    break
                if v <= x and known[v] != 0xFF:
                    hit = known[v]
                    break
                if v > x and v in big:
                    hit = big[v]
                    break
                if v in on_path:
                    hit = 0
                    break
                path.append(v)
                on_path.add(v)
                v = t_step(v)
                steps += 1
                if v >= MAX_TRAJECTORY_VALUE:
                    raise OverflowError(f"trajectory of {n} exceeded 2**128")
                if steps > budget:
                    raise BudgetExceeded(
                        f"trajectory of {n} unresolved after {budget} steps"
                    )
            for w in path:
                if w <= x:
                    known[w] = hit
                else:
                    big[w] = hit
            known[n] = hit
        count += known[n]
    return count


class Branch(Enum):
    D1 = "D1"
    D2 = "D2"
    D3 = "D3"


_BRANCH_BY_RESIDUE = {2: Branch.D1, 5: Branch.D2, 8: Branch.D3}


@dataclass(frozen=True)
class ResidueClass:
    """A class ``m mod 3**k`` with ``m = 2 (mod 3)``."""

    k: int
    m: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"level must be >= 1, got {self.k}")
        if not 0 <= self.m < 3**self.k or self.m % 3 != 2:
            raise ValueError(f"{self.m} is not in [3^{self.k}]")

    @property
    def index(self) -> int:
        return (self.m - 2) // 3


def classes(k: int) -> list[int]:
    """The representatives of [3^k] in increasing order."""
    return list(range(2, 3**k, 3))


def lifts(m: int, k: int) -> tuple[int, int, int]:
    """The three classes mod 3^k lying over ``m`` mod 3^(k-1)."""
    step = 3 ** (k - 1)
    m %= step
    return (m, m + step, m + 2 * step)


@dataclass(frozen=True)
class BranchInfo:
    branch: Branch
    successor: int
    lifted: int | None = None
    lifts: tuple[int, int, int] | None = None


def classify_branch(c: ResidueClass) -> BranchInfo:
    """Which of the three base inequalities governs class ``c``, with its data.

    The successor is ``4m mod 3^k``; D1 and D3 classes also carry the class
    mod 3^(k-1) whose lifts form the minimisation term.
    """
    if c.k < 2:
        raise ValueError("classify_branch needs k >= 2")
    k, m = c.k, c.m
    branch = _BRANCH_BY_RESIDUE[m % 9]
    succ = (4 * m) % 3**k
    if branch is Branch.D2:
        return BranchInfo(branch, succ)
    if branch is Branch.D1:
        lifted = ((4 * m - 2) // 3) % 3 ** (k - 1)
    else:
        lifted = ((2 * m - 1) // 3) % 3 ** (k - 1)
    return BranchInfo(branch, succ, lifted, lifts(lifted, k))
