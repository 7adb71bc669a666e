"""Back-substitution that removes advanced terms from the D3 inequalities.

Splitting replaces an advanced leaf ``(m', beta)`` by the base inequality of
class ``m'`` evaluated at ``y + beta``.  A freshly created min-term child with
shift ``b >= 0`` is deleted when a p-node above it on the root path carries the
same class with a shift ``<= b``: monotonicity makes such a term dominated.
The process halts with every leaf retarded, and the final tree does not
depend on the order in which leaves are split.
"""

from __future__ import annotations

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .core import ResidueClass, classify_branch, Branch
from .errors import IterationLimit, MalformedTree
from .shifts import ExponentShift, _sign
from .trees import M_NODE, P_NODE, IneqTree, Node, System, build_system, expand_p_node

log = logging.getLogger(__name__)

DEFAULT_MAX_SPLITS = 5_000_000


def split_leaf(tree: IneqTree, leaf: Node) -> IneqTree:
    """Split an advanced leaf in place (before deletion) and return the tree."""
    if leaf.kind != P_NODE or not leaf.is_leaf:
        raise ValueError(f"only p-node leaves can be split, got {leaf!r}")
    if not leaf.shift.advanced:
        raise ValueError(f"leaf {leaf!r} is retarded; only advanced leaves are split")
    expand_p_node(leaf, tree.k)
    return tree


def _deleted_children(mnode: Node) -> list[Node]:
    """Children of ``mnode`` that the deletion rule removes."""
    advanced = [c for c in mnode.children if c.shift.advanced]
    if not advanced:
        return []
    wanted = {c.cls for c in advanced}
    lowest: dict[int, ExponentShift] = {}
    for anc in mnode.ancestors():
        if anc.kind == P_NODE and anc.cls in wanted:
            cur = lowest.get(anc.cls)
            if cur is None or anc.shift < cur:
                lowest[anc.cls] = anc.shift
    return [c for c in advanced if c.cls in lowest and lowest[c.cls] <= c.shift]


def _detach(node: Node) -> None:
    """Cut ``node`` from its parent and mark its whole subtree as removed."""
    node.parent.children = [c for c in node.parent.children if c is not node]
    stack = [node]
    while stack:
        n = stack.pop()
        n.parent = None
        stack.extend(n.children)


def _prune(mnode: Node) -> None:
    """Remove an m-node that lost every child, and what it leaves dangling.

    A min with no admissible term means the p-node above it never lies on a
    critical path, and neither does anything that needs that p-node: climb
    through p-nodes and emptied m-nodes until an m-node keeps another child.
    """
    node = mnode
    while True:
        parent = node.parent
        if parent.parent is None and parent.kind == P_NODE:
            raise MalformedTree(f"pruning below {mnode!r} reached the root")
        if parent.kind == M_NODE and len(parent.children) > 1:
            _detach(node)
            return
        node = parent


def apply_deletion(tree: IneqTree, mnode: Node) -> IneqTree:
    """Apply the deletion rule to the children of a newly created m-node.

    If every child goes, the branch that needed the min is pruned as well.
    """
    doomed = _deleted_children(mnode)
    if not doomed:
        return tree
    if len(doomed) == len(mnode.children):
        log.debug("all lifts of %r dominated; pruning", mnode)
        _prune(mnode)
        return tree
    ids = {id(c) for c in doomed}
    mnode.children = [c for c in mnode.children if id(c) not in ids]
    return tree


def _mnode_of(node: Node) -> Node | None:
    for child in node.children:
        if child.kind == M_NODE:
            return child
    return None


def eliminate(tree: IneqTree, order: str = "bfs", max_splits: int = DEFAULT_MAX_SPLITS) -> IneqTree:
    """Run back-substitution to the halt; returns a new tree.

    ``order`` is ``"bfs"`` (level by level) or ``"dfs"``; both give the same
    tree.  Raises :class:`IterationLimit` past ``max_splits`` splits.
    """
    if order not in ("bfs", "dfs"):
        raise ValueError(f"order must be 'bfs' or 'dfs', got {order!r}")
    out = tree.copy()
    root_min = _mnode_of(out.root)
    if root_min is not None:
        apply_deletion(out, root_min)
    pending = deque(n for n in out.leaves() if n.kind == P_NODE and n.shift.advanced)
    take = pending.popleft if order == "bfs" else pending.pop
    splits = 0
    while pending:
        leaf = take()
        if leaf.parent is None:
            continue  # pruned together with an emptied min
        splits += 1
        if splits > max_splits:
            raise IterationLimit(f"more than {max_splits} splits for class {tree.cls}")
        split_leaf(out, leaf)
        mnode = _mnode_of(leaf)
        if mnode is not None:
            apply_deletion(out, mnode)
            if leaf.parent is None:
                continue
        fresh = [leaf.children[0]] + (mnode.children if mnode is not None else [])
        advanced = [n for n in fresh if n.shift.advanced]
        if order == "dfs":
            advanced.reverse()
        pending.extend(advanced)
    return out


@dataclass(frozen=True)
class TreeStats:
    depth: int
    literals: int


def stats(tree: IneqTree) -> TreeStats:
    """Nesting depth of minimisations and number of leaves."""
    depth = 0
    literals = 0
    stack = [(tree.root, 0)]
    while stack:
        node, d = stack.pop()
        if node.kind == M_NODE:
            d += 1
        if node.is_leaf:
            literals += 1
            depth = max(depth, d)
        else:
            stack.extend((c, d) for c in node.children)
    return TreeStats(depth, literals)


def eliminate_system(
    k: int,
    order: str = "bfs",
    threads: int = 1,
    max_splits: int = DEFAULT_MAX_SPLITS,
) -> System:
    """The eliminated system: D1 and D2 trees as built, D3 trees eliminated."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    base = build_system(k)
    d3 = [m for m in sorted(base.trees) if m % 9 == 8]

    def work(m: int) -> IneqTree:
        return eliminate(base.trees[m], order=order, max_splits=max_splits)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            done = list(pool.map(work, d3))
    else:
        done = [work(m) for m in d3]
    trees = dict(base.trees)
    trees.update(zip(d3, done))
    return System(k, trees, eliminated=True)


def system_stats(system: System) -> dict[int, TreeStats]:
    """Stats of the D3 trees of an eliminated system, keyed by class."""
    return {t.cls: stats(t) for t in system if t.cls % 9 == 8}


def max_stats(system: System) -> TreeStats:
    """Stats of the D3 tree with the largest expansion."""
    per = system_stats(system)
    return max(per.values(), key=lambda s: (s.literals, s.depth))


@dataclass(frozen=True)
class StreamStats:
    depth: int
    literals: int
    complete: bool


_DEAD = None


def stream_stats(
    k: int,
    m: int,
    depth_limit: int | None = None,
    literal_limit: int | None = None,
    node_cap: int | None = None,
) -> StreamStats:
    """Depth and literal count of the eliminated tree for class ``m``, without
    materialising it.

    Walks the eliminated tree depth first and folds subtree sizes bottom up,
    so pruned branches drop out exactly as in :func:`eliminate`.  Stops early
    (``complete=False``) once a path deeper than ``depth_limit`` or more than
    ``literal_limit`` leaves have been seen, or ``node_cap`` nodes visited;
    the counts then describe the part explored so far, which later pruning
    could still shrink.
    """
    mod = 3**k
    info_cache: dict[int, tuple] = {}

    def info(c: int) -> tuple:
        got = info_cache.get(c)
        if got is None:
            bi = classify_branch(ResidueClass(k, c))
            if bi.branch is Branch.D2:
                got = (bi.successor, None, None)
            else:
                step = (-2, 1) if bi.branch is Branch.D1 else (-1, 1)
                got = (bi.successor, step, bi.lifts)
            info_cache[c] = got
        return got

    # running minimum of ancestor shifts per class along the current path
    lowest: dict[int, list[tuple[int, int]]] = {}
    # work items: ("p", class, p, q, mdepth) enters a p-node;
    # ("P", class, nchildren) and ("M", nchildren) fold finished children
    stack: list[tuple] = [("p", m % mod, 0, 0, 0)]
    # folded results: (literals, depth) or _DEAD
    results: list[tuple[int, int] | None] = []
    seen_depth = seen_literals = visited = 0
    first = True
    while stack:
        item = stack.pop()
        tag = item[0]
        if tag == "P":
            _, c, n = item
            lowest[c].pop()
            kids = results[-n:]
            del results[-n:]
            if any(r is _DEAD for r in kids):
                results.append(_DEAD)
            else:
                results.append((sum(r[0] for r in kids), max(r[1] for r in kids)))
            continue
        if tag == "M":
            n = item[1]
            kids = [r for r in results[len(results) - n :] if r is not _DEAD] if n else []
            if n:
                del results[-n:]
            if kids:
                results.append((sum(r[0] for r in kids), 1 + max(r[1] for r in kids)))
            else:
                results.append(_DEAD)
            continue
        _, c, p, q, d = item
        visited += 1
        if not first and _sign(p, q) < 0:
            results.append((1, 0))
            seen_literals += 1
            seen_depth = max(seen_depth, d)
            if (literal_limit is not None and seen_literals > literal_limit) or (
                depth_limit is not None and seen_depth > depth_limit
            ):
                return StreamStats(seen_depth, seen_literals, False)
            continue
        if node_cap is not None and visited > node_cap:
            return StreamStats(seen_depth, seen_literals, False)
        first = False
        runs = lowest.setdefault(c, [])
        prev = runs[-1] if runs else None
        runs.append((p, q) if prev is None or _sign(p - prev[0], q - prev[1]) < 0 else prev)
        succ, step, lift = info(c)
        if step is None:
            stack.append(("P", c, 1))
            stack.append(("p", succ, p - 2, q, d))
            continue
        sp, sq = p + step[0], q + step[1]
        adv = _sign(sp, sq) >= 0
        kept = []
        for child in lift:
            if adv:
                r = lowest.get(child)
                if r and _sign(r[-1][0] - sp, r[-1][1] - sq) <= 0:
                    continue
            kept.append(child)
        stack.append(("P", c, 2))
        stack.append(("M", len(kept)))
        for child in reversed(kept):
            stack.append(("p", child, sp, sq, d + 1))
        stack.append(("p", succ, p - 2, q, d))
    root = results.pop()
    if root is _DEAD:
        raise MalformedTree(f"pruning reached the root of class {m}")
    return StreamStats(root[1], root[0], True)
