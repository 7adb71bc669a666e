import pytest
from hypothesis import given, settings, strategies as st

from collatz_bounds.core import classes
from collatz_bounds.eliminate import split_leaf
from collatz_bounds.errors import MalformedTree
from collatz_bounds.shifts import ALPHA, STEP_D1_MIN, STEP_D3_MIN, STEP_DIRECT, ZERO, ExponentShift
from collatz_bounds.trees import (
    M_NODE,
    P_NODE,
    build_base_tree,
    build_system,
    parse_system,
    parse_tree,
)


def shape(node):
    return (node.kind, node.cls, (node.shift.p, node.shift.q), [shape(c) for c in node.children])


def test_shift_signs():
    assert STEP_DIRECT < ZERO
    assert STEP_D1_MIN < ZERO
    assert STEP_D3_MIN > ZERO and STEP_D3_MIN.advanced
    assert ZERO.advanced
    assert str(ExponentShift(-5, 2)) == "2α-5"
    # 2^19 < 3^12 by a hair; floats alone would be risky near such pairs
    assert ExponentShift(-19, 12) > ZERO
    assert ExponentShift(19, -12) < ZERO


@given(st.integers(-60, 60), st.integers(-40, 40), st.integers(-60, 60), st.integers(-40, 40))
def test_shift_order_matches_exact_powers(p1, q1, p2, q2):
    a, b = ExponentShift(p1, q1), ExponentShift(p2, q2)
    # compare 2^p1 3^q1 with 2^p2 3^q2 by clearing denominators
    lhs = 2 ** max(p1 - p2, 0) * 3 ** max(q1 - q2, 0)
    rhs = 2 ** max(p2 - p1, 0) * 3 ** max(q2 - q1, 0)
    assert (a < b) == (lhs < rhs)
    assert (a == b) == (lhs == rhs)
    assert abs(float(a) - (p1 + q1 * ALPHA)) < 1e-9


def test_base_tree_d3():
    t = build_base_tree(2, 8)
    assert shape(t.root) == (
        P_NODE, 8, (0, 0), [
            (P_NODE, 5, (-2, 0), []),
            (M_NODE, 2, (-1, 1), [
                (P_NODE, 2, (-1, 1), []),
                (P_NODE, 5, (-1, 1), []),
                (P_NODE, 8, (-1, 1), []),
            ]),
        ],
    )


def test_base_tree_d2():
    assert shape(build_base_tree(2, 5).root) == (P_NODE, 5, (0, 0), [(P_NODE, 2, (-2, 0), [])])
    assert shape(build_base_tree(3, 5).root) == (P_NODE, 5, (0, 0), [(P_NODE, 20, (-2, 0), [])])


def test_base_tree_d1():
    t = build_base_tree(2, 2)
    assert [c.kind for c in t.root.children] == [P_NODE, M_NODE]
    m = t.root.children[1]
    assert m.shift == STEP_D1_MIN
    assert [c.cls for c in m.children] == [2, 5, 8]


def test_base_tree_rejects():
    with pytest.raises(ValueError):
        build_base_tree(2, 4)
    with pytest.raises(ValueError):
        build_base_tree(1, 2)


@pytest.mark.parametrize("k,n", [(2, 3), (3, 9), (4, 27)])
def test_build_system_counts(k, n):
    system = build_system(k)
    assert len(system) == n
    for residue in (2, 5, 8):
        assert sum(1 for t in system if t.cls % 9 == residue) == 3 ** (k - 2)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_only_d3_trees_have_advanced_terms(k):
    for t in build_system(k):
        has_adv = any(n.shift.advanced for n in t.nodes() if n is not t.root)
        assert has_adv == (t.cls % 9 == 8)


@st.composite
def grown_trees(draw):
    k = draw(st.integers(2, 3))
    m = draw(st.sampled_from([c for c in classes(k) if c % 9 == 8]))
    tree = build_base_tree(k, m)
    for _ in range(draw(st.integers(0, 12))):
        adv = [n for n in tree.leaves() if n.kind == P_NODE and n.shift.advanced]
        if not adv:
            break
        split_leaf(tree, draw(st.sampled_from(adv)))
    return tree


@settings(max_examples=100, deadline=None)
@given(grown_trees())
def test_round_trip(tree):
    text = tree.to_text()
    back = parse_tree(text, tree.k)
    assert shape(back.root) == shape(tree.root)
    assert back.to_text() == text


def test_system_round_trip():
    system = build_system(3)
    back = parse_system(system.to_text())
    assert back.k == 3 and not back.eliminated
    assert back.to_text() == system.to_text()


@pytest.mark.parametrize("text", ["", "(p 2 0 0", "(q 2 0 0)", "(p 2 0 0) (p 5 0 0)", "(p x 0 0)"])
def test_parse_rejects(text):
    with pytest.raises(MalformedTree):
        parse_tree(text, 2)


def test_parse_system_needs_header():
    with pytest.raises(MalformedTree):
        parse_system("(p 5 0 0 (p 2 -2 0))\n")
