"""Difference inequalities as rooted labelled trees, and the base system.

A p-node labelled ``(m, beta)`` stands for the term ``phi_k^m(y + beta)``.  An
m-node stands for the minimum of its children, which are lifts of one class
mod 3^(k-1) sharing a single shift; its label is that class and that shift.
A p-node's value is the sum of its children, so the inequality reads
``phi(root) >= value of the tree below the root``.

Canonical text form (one tree per line)::

    (p CLASS P Q CHILD ...)     p-node with shift P + Q*alpha
    (m CLASS P Q CHILD ...)     m-node, CLASS taken mod 3^(k-1)

Children appear in canonical order: the direct p-child first, then the
m-node; m-node children in lift order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator

from .core import Branch, ResidueClass, classes, classify_branch
from .errors import MalformedTree
from .shifts import STEP_D1_MIN, STEP_D3_MIN, STEP_DIRECT, ZERO, ExponentShift

P_NODE = "p"
M_NODE = "m"


class Node:
    __slots__ = ("kind", "cls", "shift", "children", "parent")

    def __init__(self, kind: str, cls: int, shift: ExponentShift, parent: Node | None = None):
        self.kind = kind
        self.cls = cls
        self.shift = shift
        self.children: list[Node] = []
        self.parent = parent

    def add(self, kind: str, cls: int, shift: ExponentShift) -> Node:
        child = Node(kind, cls, shift, self)
        self.children.append(child)
        return child

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def ancestors(self) -> Iterator[Node]:
        node = self.parent
        while node is not None:
            yield node
            node = node.parent

    def __repr__(self) -> str:
        return f"Node({self.kind}, {self.cls}, {self.shift}, {len(self.children)} children)"


@dataclass
class IneqTree:
    k: int
    root: Node

    @property
    def cls(self) -> int:
        return self.root.cls

    def nodes(self) -> Iterator[Node]:
        """Preorder traversal in canonical child order."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> Iterator[Node]:
        return (n for n in self.nodes() if n.is_leaf)

    def m_nodes(self) -> Iterator[Node]:
        return (n for n in self.nodes() if n.kind == M_NODE)

    def copy(self) -> IneqTree:
        root = Node(self.root.kind, self.root.cls, self.root.shift)
        stack = [(self.root, root)]
        while stack:
            src, dst = stack.pop()
            for child in src.children:
                stack.append((child, dst.add(child.kind, child.cls, child.shift)))
        return IneqTree(self.k, root)

    def to_text(self) -> str:
        return to_text(self.root)

    def __eq__(self, other) -> bool:
        if not isinstance(other, IneqTree):
            return NotImplemented
        return self.k == other.k and self.to_text() == other.to_text()


@dataclass
class System:
    """One inequality tree per class of [3^k], keyed by class."""

    k: int
    trees: dict[int, IneqTree] = field(default_factory=dict)
    eliminated: bool = False

    def __iter__(self) -> Iterator[IneqTree]:
        return (self.trees[m] for m in sorted(self.trees))

    def __len__(self) -> int:
        return len(self.trees)

    def to_text(self) -> str:
        head = f"# k={self.k} {'EL' if self.eliminated else 'base'}\n"
        return head + "".join(t.to_text() + "\n" for t in self)


def expand_p_node(node: Node, k: int) -> Node | None:
    """Attach the base inequality for ``node``'s class below it.

    Adds the direct p-child and, for D1/D3 classes, an m-node with its three
    lift leaves.  Returns the new m-node, if any.
    """
    info = classify_branch(ResidueClass(k, node.cls))
    node.add(P_NODE, info.successor, node.shift + STEP_DIRECT)
    if info.branch is Branch.D2:
        return None
    step = STEP_D1_MIN if info.branch is Branch.D1 else STEP_D3_MIN
    shift = node.shift + step
    mnode = node.add(M_NODE, info.lifted, shift)
    for lift in info.lifts:
        mnode.add(P_NODE, lift, shift)
    return mnode


def build_base_tree(k: int, m: int) -> IneqTree:
    if k < 2:
        raise ValueError(f"base trees need k >= 2, got {k}")
    ResidueClass(k, m)
    root = Node(P_NODE, m, ZERO)
    expand_p_node(root, k)
    return IneqTree(k, root)


def build_system(k: int) -> System:
    return System(k, {m: build_base_tree(k, m) for m in classes(k)})


def to_text(root: Node) -> str:
    parts: list[str] = []
    # explicit stack; eliminated trees nest hundreds of levels deep
    stack: list[Node | str] = [root]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
            continue
        parts.append(f"({item.kind} {item.cls} {item.shift.p} {item.shift.q}")
        stack.append(")")
        for child in reversed(item.children):
            stack.append(child)
            stack.append(" ")
    return "".join(parts)


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_tree(text: str, k: int) -> IneqTree:
    tokens = _TOKEN.findall(text)
    pos = 0
    root: Node | None = None
    stack: list[Node] = []
    try:
        while pos < len(tokens):
            tok = tokens[pos]
            if tok == "(":
                kind, cls, p, q = tokens[pos + 1 : pos + 5]
                if kind not in (P_NODE, M_NODE):
                    raise MalformedTree(f"unknown node kind {kind!r}")
                shift = ExponentShift(int(p), int(q))
                if stack:
                    node = stack[-1].add(kind, int(cls), shift)
                elif root is None:
                    node = root = Node(kind, int(cls), shift)
                else:
                    raise MalformedTree("more than one root")
                stack.append(node)
                pos += 5
            elif tok == ")":
                stack.pop()
                pos += 1
            else:
                raise MalformedTree(f"unexpected token {tok!r}")
    except (ValueError, IndexError) as exc:
        raise MalformedTree(str(exc)) from exc
    if root is None or stack:
        raise MalformedTree("unbalanced tree text")
    return IneqTree(k, root)


def parse_system(text: str) -> System:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    m = re.match(r"#\s*k=(\d+)\s+(\w+)", lines[0]) if lines else None
    if not m:
        raise MalformedTree("missing '# k=<k> base|EL' header")
    k = int(m.group(1))
    trees = [parse_tree(ln, k) for ln in lines[1:]]
    return System(k, {t.cls: t for t in trees}, eliminated=m.group(2) == "EL")
