"""Parametric linear programs attached to the inequality systems.

Every constraint has the shape ``lhs * lam**b0 <= sum(var_i * lam**b_i)`` with
exact shifts ``b``.  Numbers only appear through :func:`evaluate_coefficient`,
which rounds in a caller-chosen direction.

Emission format, one constraint per line::

    (c[8], 0, 0) <= (c[5], -2, 0) + (a[8.1], -1, 1)
    1 <= c[2] <= Cmax

where ``(var, p, q)`` is ``var * lam**(p + q*alpha)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import gmpy2

from .core import Branch, ResidueClass, classes, classify_branch, lifts
from .errors import MalformedTree
from .shifts import STEP_D1_MIN, STEP_D3_MIN, STEP_DIRECT, ZERO, ExponentShift
from .trees import M_NODE, IneqTree, System, build_system

PRINCIPAL = "principal"
AUX_NT = "aux_nt"
AUX_TREE = "aux_tree"
OBJECTIVE = "objective"


@dataclass(frozen=True, order=True)
class LPVariable:
    role: str
    key: tuple[int, ...] = ()

    @property
    def name(self) -> str:
        if self.role == PRINCIPAL:
            return f"c[{self.key[0]}]"
        if self.role == AUX_NT:
            return f"cb[{self.key[0]}]"
        if self.role == AUX_TREE:
            return f"a[{self.key[0]}.{self.key[1]}]"
        return "Cmax"

    def __str__(self) -> str:
        return self.name


def principal(m: int) -> LPVariable:
    return LPVariable(PRINCIPAL, (m,))


def aux_nt(m: int) -> LPVariable:
    return LPVariable(AUX_NT, (m,))


def aux_tree(root_cls: int, index: int) -> LPVariable:
    return LPVariable(AUX_TREE, (root_cls, index))


CMAX = LPVariable(OBJECTIVE)

Term = tuple[LPVariable, ExponentShift]


@dataclass(frozen=True)
class LPConstraint:
    lhs: Term
    rhs: tuple[Term, ...]
    label: str = ""

    def format(self) -> str:
        def term(t: Term) -> str:
            return f"({t[0].name}, {t[1].p}, {t[1].q})"

        return f"{term(self.lhs)} <= " + " + ".join(term(t) for t in self.rhs)


@dataclass
class LinearProgram:
    """Minimise ``Cmax`` subject to ``1 <= c[m] <= Cmax`` and ``constraints``."""

    k: int
    family: str
    principals: list[LPVariable]
    auxiliaries: list[LPVariable]
    constraints: list[LPConstraint] = field(default_factory=list)

    @property
    def variables(self) -> list[LPVariable]:
        return self.principals + self.auxiliaries + [CMAX]

    def format(self) -> str:
        lines = [f"# family={self.family} k={self.k}", "minimize Cmax"]
        lines += [f"1 <= {v.name} <= Cmax" for v in self.principals]
        lines += [c.format() for c in self.constraints]
        return "\n".join(lines) + "\n"


def build_lp_nt(k: int) -> LinearProgram:
    """The direct program: one (L1)-(L3) constraint per class plus (L4)."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    cons: list[LPConstraint] = []
    for m in classes(k):
        info = classify_branch(ResidueClass(k, m))
        rhs: list[Term] = [(principal(info.successor), STEP_DIRECT)]
        if info.branch is Branch.D1:
            rhs.append((aux_nt(info.lifted), STEP_D1_MIN))
        elif info.branch is Branch.D3:
            rhs.append((aux_nt(info.lifted), STEP_D3_MIN))
        label = {Branch.D1: "L1", Branch.D2: "L2", Branch.D3: "L3"}[info.branch]
        cons.append(LPConstraint((principal(m), ZERO), tuple(rhs), f"{label}:{m}"))
    for m in classes(k - 1):
        for j, lift in enumerate(lifts(m, k)):
            cons.append(LPConstraint((aux_nt(m), ZERO), ((principal(lift), ZERO),), f"L4:{m}.{j}"))
    return LinearProgram(
        k,
        "nt",
        [principal(m) for m in classes(k)],
        [aux_nt(m) for m in classes(k - 1)],
        cons,
    )


def number_m_nodes(tree: IneqTree) -> dict[int, int]:
    """Preorder numbering (from 1) of the m-nodes of ``tree``, keyed by ``id``."""
    return {id(n): i for i, n in enumerate(tree.m_nodes(), start=1)}


def build_lp_from_tree(tree: IneqTree) -> list[LPConstraint]:
    """One constraint per leaf.

    A leaf with no m-node above it bounds the root principal variable.  Any
    other leaf bounds ``a_v0`` for the last m-node ``v0`` above it; the right
    side is the leaf term plus every m-node hanging off a p-node strictly
    between ``v0`` and the leaf.
    """
    numbers = number_m_nodes(tree)
    root_cls = tree.cls
    out: list[LPConstraint] = []
    # walk with the current terminal segment: (head term, m-nodes hanging off it)
    stack = [(tree.root, None, ())]
    while stack:
        node, head, hanging = stack.pop()
        if node.kind == M_NODE:
            head_term = (aux_tree(root_cls, numbers[id(node)]), node.shift)
            stack.extend((c, head_term, ()) for c in reversed(node.children))
            continue
        if head is None:
            head = (principal(root_cls), ZERO)
        if node.is_leaf:
            rhs = ((principal(node.cls), node.shift),) + hanging
            out.append(LPConstraint(head, rhs, f"T{root_cls}:({node.cls},{node.shift})"))
            continue
        extra = tuple(
            (aux_tree(root_cls, numbers[id(c)]), c.shift) for c in node.children if c.kind == M_NODE
        )
        for c in reversed(node.children):
            if c.kind == M_NODE:
                stack.append((c, None, ()))
            else:
                stack.append((c, head, hanging + extra))
    if any(n.kind == M_NODE and n.is_leaf for n in tree.nodes()):
        raise MalformedTree(f"tree for class {root_cls} has an m-node leaf")
    return out


def build_lp_system(system: System, family: str) -> LinearProgram:
    k = system.k
    cons: list[LPConstraint] = []
    aux: list[LPVariable] = []
    for tree in system:
        cons.extend(build_lp_from_tree(tree))
        aux.extend(aux_tree(tree.cls, i) for i in range(1, len(number_m_nodes(tree)) + 1))
    return LinearProgram(k, family, [principal(m) for m in classes(k)], aux, cons)


def build_lp_el(k: int, system: System | None = None) -> LinearProgram:
    """The program attached to the eliminated system."""
    if system is None:
        from .eliminate import eliminate_system

        system = eliminate_system(k)
    return build_lp_system(system, "el")


def build_lp_base(k: int) -> LinearProgram:
    """The tree-form program of the base system; equivalent to the direct one."""
    return build_lp_system(build_system(k), "base")


def _as_fraction(lam) -> Fraction:
    return lam if isinstance(lam, Fraction) else Fraction(str(lam))


_ROUND = {"down": gmpy2.RoundDown, "up": gmpy2.RoundUp}


def coefficient_bounds(shift: ExponentShift, lam, bits: int = 64) -> tuple[Fraction, Fraction]:
    """Rigorous ``(lower, upper)`` bounds on ``lam**(p + q*log2(3))``.

    Each MPFR operation is rounded in the direction that keeps the enclosure
    valid; ``bits`` is the working precision of the significands.
    """
    lam = _as_fraction(lam)
    if not 1 <= lam <= 2:
        raise ValueError(f"lambda must lie in [1, 2], got {lam}")
    if shift == ZERO:
        return Fraction(1), Fraction(1)
    prec = bits + 16
    q_lam = gmpy2.mpq(lam.numerator, lam.denominator)
    p, q = shift.p, shift.q

    def ctx(direction):
        return gmpy2.context(precision=prec, round=_ROUND[direction])

    with ctx("down"):
        log_lo = gmpy2.log2(gmpy2.mpfr(q_lam))
        a_lo = gmpy2.log2(gmpy2.mpfr(3))
    with ctx("up"):
        log_hi = gmpy2.log2(gmpy2.mpfr(q_lam))
        a_hi = gmpy2.log2(gmpy2.mpfr(3))
    # exponent p + q*alpha as an interval
    with ctx("down"):
        b_lo = p + q * (a_lo if q >= 0 else a_hi)
    with ctx("up"):
        b_hi = p + q * (a_hi if q >= 0 else a_lo)
    # exponent * log2(lam); log2(lam) >= 0
    with ctx("down"):
        e_lo = b_lo * (log_lo if b_lo >= 0 else log_hi)
    with ctx("up"):
        e_hi = b_hi * (log_hi if b_hi >= 0 else log_lo)
    with ctx("down"):
        lo = gmpy2.exp2(e_lo)
    with ctx("up"):
        hi = gmpy2.exp2(e_hi)
    return Fraction(*lo.as_integer_ratio()), Fraction(*hi.as_integer_ratio())


def evaluate_coefficient(shift: ExponentShift, lam, rounding: str, bits: int = 64) -> Fraction:
    """``lam**shift`` rounded ``"down"`` or ``"up"``, as an exact rational bound."""
    if rounding not in _ROUND:
        raise ValueError(f"rounding must be 'down' or 'up', got {rounding!r}")
    lo, hi = coefficient_bounds(shift, lam, bits)
    return lo if rounding == "down" else hi


def shifts_in(lp: LinearProgram) -> set[ExponentShift]:
    out = set()
    for c in lp.constraints:
        out.add(c.lhs[1])
        out.update(t[1] for t in c.rhs)
    return out


def to_dense(lp: LinearProgram, lam: float) -> tuple[list[LPVariable], list[dict[int, float]]]:
    """Float rows ``sum(coef * x) <= 0`` for use with an external LP solver."""
    index = {v: i for i, v in enumerate(lp.variables)}
    rows = []
    for con in lp.constraints:
        row: dict[int, float] = {}
        var, s = con.lhs
        row[index[var]] = row.get(index[var], 0.0) + lam ** float(s)
        for var, s in con.rhs:
            row[index[var]] = row.get(index[var], 0.0) - lam ** float(s)
        rows.append(row)
    return lp.variables, rows


def variable_names(variables: Iterable[LPVariable]) -> list[str]:
    return [v.name for v in variables]
