"""Exact structure decoders and their brute-force oracles.

The joint-span chart decoder returns the binarized head-annotated tree
maximizing the sum of span label scores and dependency arc scores, so one
pass yields both a constituent tree and a projective dependency tree. The
role decoder maximizes role-margin sums over disjoint spans. Brute-force
enumerators ship alongside for small instances; decoder totals are
recomputed by one canonical tree walk so oracle comparisons can demand
exact float equality.

Scores may contain -inf to forbid a structure outright; NaN and +inf are
rejected.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from lingmtl.corpus import ConstituentTree

MAX_BRUTE_FORCE_WORDS = 8
MAX_BRUTE_FORCE_SPANS = 20

SPAN_STYLE = "span"
DEP_STYLE = "dep"


@dataclass(frozen=True)
class JointSpanNode:
    """Binarized tree node: inclusive word span, label index (0 = empty
    placeholder), and the span's head word."""

    start: int
    end: int
    label: int
    head: int
    children: tuple["JointSpanNode", ...] = ()


@dataclass
class JointSpanTree:
    root: JointSpanNode
    dep_heads: list[int]  # 1-based head per word, 0 = root
    dep_labels: list[int]
    score: float


@dataclass
class SrlSelection:
    """Chosen argument units for one predicate: (start, end, role) span
    triples or (word, role) pairs, plus the canonical margin total."""

    arguments: list[tuple]
    score: float


def _check_scores(name: str, arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if np.isnan(arr).any() or np.isposinf(arr).any():
        raise ValueError(f"{name} contains NaN or +inf")
    return arr


# ---------------------------------------------------------------------------
# canonical scoring walk (shared by decoder and oracle)


def derived_arcs(root: JointSpanNode) -> list[tuple[int, int]]:
    """(dependent word, head word) pairs in canonical DFS order, root arc
    (root head word, -1) last."""
    arcs: list[tuple[int, int]] = []

    def walk(node: JointSpanNode) -> None:
        if not node.children:
            return
        left, right = node.children
        walk(left)
        walk(right)
        child = right if node.head == left.head else left
        arcs.append((child.head, node.head))

    walk(root)
    arcs.append((root.head, -1))
    return arcs


def score_joint_tree(
    root: JointSpanNode,
    span_label_scores: np.ndarray,
    arc_scores: np.ndarray,
) -> float:
    """Total tree score accumulated in one fixed DFS order.

    Both the chart decoder and the brute-force oracle report totals from
    this walk, so equal trees produce bitwise-equal floats.
    """
    total = 0.0

    def walk(node: JointSpanNode) -> None:
        nonlocal total
        total += float(span_label_scores[node.start, node.end, node.label])
        if not node.children:
            return
        left, right = node.children
        walk(left)
        walk(right)
        child = right if node.head == left.head else left
        total += float(arc_scores[child.head, node.head + 1])

    walk(root)
    total += float(arc_scores[root.head, 0])
    return total


def tree_dep_heads(root: JointSpanNode, n: int) -> list[int]:
    heads = [0] * n
    for dep, head in derived_arcs(root):
        heads[dep] = 0 if head < 0 else head + 1
    return heads


# ---------------------------------------------------------------------------
# joint-span chart decoding


def joint_span_cky(
    span_label_scores: np.ndarray,
    arc_scores: np.ndarray,
    rel_scores: np.ndarray | None,
    n: int,
) -> JointSpanTree:
    """Exact joint decode over (start, end, head) chart items.

    Ties break toward the smaller split point, then a head taken from the
    left child, then the smaller sibling head index. Relation labels are
    read off ``rel_scores`` per derived arc afterward.
    """
    if n <= 0:
        raise ValueError("cannot decode an empty sentence")
    span_label_scores = _check_scores("span_label_scores", span_label_scores)
    arc_scores = _check_scores("arc_scores", arc_scores)
    if span_label_scores.shape[0] < n or span_label_scores.shape[1] < n:
        raise ValueError("span_label_scores too small for sentence")
    if arc_scores.shape[0] < n or arc_scores.shape[1] < n + 1:
        raise ValueError("arc_scores must cover every word and the root column")

    best_label = span_label_scores[:n, :n].max(axis=2)
    label_choice = span_label_scores[:n, :n].argmax(axis=2)
    arc_to_word = arc_scores[:n, 1 : n + 1]  # [dependent, head word]

    neg = -np.inf
    chart = np.full((n, n, n), neg)
    for i in range(n):
        chart[i, i, i] = best_label[i, i]
    # back[i][j][h] = (k, side, other head); side 0 puts the head on the left
    back: list[list[dict[int, tuple[int, int, int]]]] = [
        [dict() for _ in range(n)] for _ in range(n)
    ]

    for width in range(2, n + 1):
        for i in range(n - width + 1):
            j = i + width - 1
            ks = np.arange(i, j)
            left = chart[i, ks, :]  # [k, a] = best(i, k, a)
            right = chart[ks + 1, j, :]  # [k, b] = best(k+1, j, b)
            # attach[h, d] = arc score of word d attaching to head word h
            attach = arc_to_word.T[:, None, :]  # [h, 1, d] broadcast over k
            right_in = right[None, :, :] + attach  # [h, k, b]
            left_in = left[None, :, :] + attach  # [h, k, a]
            inner_l = right_in.max(axis=2)  # [h, k]
            inner_l_arg = right_in.argmax(axis=2)
            inner_r = left_in.max(axis=2)
            inner_r_arg = left_in.argmax(axis=2)
            m_left = left.T + inner_l  # [h, k]: head in left child
            m_right = right.T + inner_r  # [h, k]: head in right child
            # candidate order per head: k ascending, left side before right
            stacked = np.stack([m_left, m_right], axis=2)  # [h, k, side]
            flat = stacked.reshape(n, -1)
            pick = flat.argmax(axis=1)
            value = flat[np.arange(n), pick]
            chart[i, j, :] = best_label[i, j] + value
            for h in range(i, j + 1):
                k_off, side = divmod(int(pick[h]), 2)
                k = i + k_off
                other = int(
                    inner_l_arg[h, k_off] if side == 0 else inner_r_arg[h, k_off]
                )
                back[i][j][h] = (k, side, other)

    top = chart[0, n - 1, :] + arc_scores[:n, 0]
    root_head = int(top.argmax())
    if not np.isfinite(top[root_head]):
        raise ValueError("every complete tree is forbidden by -inf scores")

    def rebuild(i: int, j: int, h: int) -> JointSpanNode:
        label = int(label_choice[i, j])
        if i == j:
            return JointSpanNode(i, j, label, h)
        k, side, other = back[i][j][h]
        if side == 0:
            left_node = rebuild(i, k, h)
            right_node = rebuild(k + 1, j, other)
        else:
            left_node = rebuild(i, k, other)
            right_node = rebuild(k + 1, j, h)
        return JointSpanNode(i, j, label, h, (left_node, right_node))

    root = rebuild(0, n - 1, root_head)
    score = score_joint_tree(root, span_label_scores, arc_scores)
    heads = tree_dep_heads(root, n)
    labels = [0] * n
    if rel_scores is not None:
        rel_scores = _check_scores("rel_scores", rel_scores)
        for dep in range(n):
            labels[dep] = int(rel_scores[dep, heads[dep]].argmax())
    return JointSpanTree(root=root, dep_heads=heads, dep_labels=labels, score=score)


def enumerate_joint_trees(i: int, j: int, label_choice: np.ndarray) -> Iterator[JointSpanNode]:
    """Every head-annotated binarization of the span [i, j], labels fixed
    to their per-span argmax."""
    if i == j:
        yield JointSpanNode(i, i, int(label_choice[i, i]), i)
        return
    label = int(label_choice[i, j])
    for k in range(i, j):
        for left in enumerate_joint_trees(i, k, label_choice):
            for right in enumerate_joint_trees(k + 1, j, label_choice):
                yield JointSpanNode(i, j, label, left.head, (left, right))
                yield JointSpanNode(i, j, label, right.head, (left, right))


def brute_force_parse(
    span_label_scores: np.ndarray,
    arc_scores: np.ndarray,
    n: int,
) -> tuple[float, JointSpanNode]:
    """Exhaustive maximum over head-annotated binarized trees."""
    if n <= 0:
        raise ValueError("cannot decode an empty sentence")
    if n > MAX_BRUTE_FORCE_WORDS:
        raise ValueError(f"brute force capped at {MAX_BRUTE_FORCE_WORDS} words")
    span_label_scores = _check_scores("span_label_scores", span_label_scores)
    arc_scores = _check_scores("arc_scores", arc_scores)
    label_choice = span_label_scores[:n, :n].argmax(axis=2)
    best: tuple[float, JointSpanNode] | None = None
    for tree in enumerate_joint_trees(0, n - 1, label_choice):
        score = score_joint_tree(tree, span_label_scores, arc_scores)
        if best is None or score > best[0]:
            best = (score, tree)
    assert best is not None
    return best


def count_joint_trees(n: int) -> int:
    """Number of head-annotated binarizations of an n-word span."""
    if n > MAX_BRUTE_FORCE_WORDS:
        raise ValueError(f"brute force capped at {MAX_BRUTE_FORCE_WORDS} words")
    counts = [0, 1]
    for width in range(2, n + 1):
        total = 0
        for k in range(1, width):
            total += 2 * counts[k] * counts[width - k]
        counts.append(total)
    return counts[n]


# ---------------------------------------------------------------------------
# semantic-role decoding


def _margins(unit_scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Best non-null margin and role per unit; role index 0 is null."""
    if unit_scores.shape[1] < 2:
        raise ValueError("role scores need the null role plus at least one role")
    best_role = unit_scores[:, 1:].argmax(axis=1) + 1
    margins = unit_scores[np.arange(len(unit_scores)), best_role] - unit_scores[:, 0]
    return margins, best_role


def _canonical_span_total(chosen: list[tuple[int, int, int]], margins, order) -> float:
    total = 0.0
    for start, end, _role in sorted(chosen):
        total += float(margins[order[(start, end)]])
    return total


def srl_decode(unit_scores: np.ndarray, units: Sequence, style: str) -> SrlSelection:
    """Pick argument units for one predicate.

    Span style solves weighted interval scheduling over positive-margin
    spans; ties prefer leaving a span out. Dependency style is a per-word
    argmax including the null role.
    """
    unit_scores = _check_scores("unit_scores", unit_scores)
    if len(units) != unit_scores.shape[0]:
        raise ValueError("one score row per candidate unit required")
    if style == DEP_STYLE:
        chosen = []
        total = 0.0
        for row, word in enumerate(units):
            role = int(unit_scores[row].argmax())
            if role != 0:
                chosen.append((int(word), role))
                total += float(unit_scores[row, role] - unit_scores[row, 0])
        return SrlSelection(arguments=chosen, score=total)
    if style != SPAN_STYLE:
        raise ValueError(f"unknown style {style!r}")

    margins, best_role = _margins(unit_scores)
    order = {
        (int(s), int(e)): row for row, (s, e) in enumerate(units)
    }
    indexed = sorted(range(len(units)), key=lambda r: (units[r][1], units[r][0]))
    ends = [units[r][1] for r in indexed]
    dp = [0.0] * (len(indexed) + 1)
    take = [False] * len(indexed)
    for pos, row in enumerate(indexed):
        start, end = int(units[row][0]), int(units[row][1])
        margin = float(margins[row])
        skip = dp[pos]
        prev = bisect.bisect_left(ends, start, 0, pos)
        take_score = dp[prev] + margin if margin > 0 else -np.inf
        if take_score > skip:
            dp[pos + 1] = take_score
            take[pos] = True
        else:
            dp[pos + 1] = skip
    chosen: list[tuple[int, int, int]] = []
    pos = len(indexed)
    while pos > 0:
        if take[pos - 1]:
            row = indexed[pos - 1]
            start, end = int(units[row][0]), int(units[row][1])
            chosen.append((start, end, int(best_role[row])))
            pos = bisect.bisect_left(ends, start, 0, pos - 1)
        else:
            pos -= 1
    chosen.reverse()
    total = _canonical_span_total(chosen, margins, order)
    return SrlSelection(arguments=chosen, score=total)


def brute_force_srl(unit_scores: np.ndarray, units: Sequence, style: str) -> SrlSelection:
    """Exhaustive maximum over disjoint unit subsets (span style) or the
    trivially independent per-word choice (dependency style)."""
    unit_scores = _check_scores("unit_scores", unit_scores)
    if style == DEP_STYLE:
        return srl_decode(unit_scores, units, style)
    if style != SPAN_STYLE:
        raise ValueError(f"unknown style {style!r}")
    if len(units) > MAX_BRUTE_FORCE_SPANS:
        raise ValueError(f"brute force capped at {MAX_BRUTE_FORCE_SPANS} spans")
    margins, best_role = _margins(unit_scores)
    order = {(int(s), int(e)): row for row, (s, e) in enumerate(units)}
    spans = sorted(order)
    positive = [sp for sp in spans if margins[order[sp]] > 0]

    best_total = 0.0
    best_set: list[tuple[int, int, int]] = []

    def extend(idx: int, taken: list[tuple[int, int]], total: float) -> None:
        nonlocal best_total, best_set
        if idx == len(positive):
            if total > best_total:
                best_total = total
                best_set = [
                    (s, e, int(best_role[order[(s, e)]])) for s, e in taken
                ]
            return
        extend(idx + 1, taken, total)
        start, end = positive[idx]
        if all(end < s or e < start for s, e in taken):
            extend(idx + 1, taken + [(start, end)], total + float(margins[order[(start, end)]]))

    extend(0, [], 0.0)
    chosen = sorted(best_set)
    return SrlSelection(
        arguments=chosen, score=_canonical_span_total(chosen, margins, order)
    )


def predict_predicates(logits: np.ndarray) -> list[int]:
    """Words whose predicate logit is strictly positive."""
    logits = _check_scores("predicate logits", logits)
    return [int(i) for i in np.nonzero(logits > 0)[0]]


# ---------------------------------------------------------------------------
# gold joint trees (constituents + dependency heads fused for training)


@dataclass
class _NarySpan:
    start: int
    end: int
    label: str
    children: list


def _nary_spans(tree: ConstituentTree) -> _NarySpan:
    """Drop preterminals and collapse same-span unary chains into joined
    labels; leaves become empty-label width-1 spans."""
    if tree.is_leaf:
        return _NarySpan(tree.word, tree.word, "", [])
    if tree.is_preterminal:
        w = tree.children[0].word
        return _NarySpan(w, w, "", [])
    labels = [tree.label]
    node = tree
    while len(node.children) == 1 and not node.children[0].is_leaf and not node.children[0].is_preterminal:
        node = node.children[0]
        labels.append(node.label)
    children = [_nary_spans(c) for c in node.children]
    start, end = tree.span()
    if len(children) == 1 and children[0].start == start and children[0].end == end:
        # unary over a bare word: keep one width-1 node with the joined label
        inner = children[0]
        label = "+".join(labels + ([inner.label] if inner.label else []))
        return _NarySpan(start, end, label, inner.children)
    return _NarySpan(start, end, "+".join(labels), children)


def collapsed_labels(tree: ConstituentTree) -> set[str]:
    """Every non-empty joined label the collapsed form of this tree uses."""
    out: set[str] = set()

    def walk(node: _NarySpan) -> None:
        if node.label:
            out.add(node.label)
        for child in node.children:
            walk(child)

    walk(_nary_spans(tree))
    return out


def _span_head(start: int, end: int, dep_heads: Sequence[int]) -> int | None:
    """The unique word whose head lies outside [start, end], if any."""
    outside = [
        w
        for w in range(start, end + 1)
        if dep_heads[w] == 0 or not start <= dep_heads[w] - 1 <= end
    ]
    if len(outside) != 1:
        return None
    return outside[0]


def build_gold_joint_tree(
    tree: ConstituentTree,
    dep_heads: Sequence[int],
    label_to_index: dict[str, int],
) -> JointSpanNode | None:
    """Fuse a gold constituent tree with gold dependency heads.

    Returns None when the two annotations are incompatible: a span without
    a unique external-head word, or a child whose head word does not attach
    to its parent's head word. Unknown joined labels must already be in
    ``label_to_index``.
    """
    nary = _nary_spans(tree)

    def build(node: _NarySpan) -> JointSpanNode | None:
        label = label_to_index.get(node.label, 0) if node.label else 0
        head = _span_head(node.start, node.end, dep_heads)
        if head is None:
            return None
        if not node.children:
            return JointSpanNode(node.start, node.end, label, head)
        built = []
        head_pos = -1
        for child in node.children:
            sub = build(child)
            if sub is None:
                return None
            if sub.head == head:
                head_pos = len(built)
            elif dep_heads[sub.head] != head + 1:
                return None  # child's head word attaches elsewhere
            built.append(sub)
        if head_pos < 0:
            return None
        current = built[head_pos]
        for sub in built[head_pos + 1 :]:
            current = JointSpanNode(current.start, sub.end, 0, head, (current, sub))
        for sub in reversed(built[:head_pos]):
            current = JointSpanNode(sub.start, current.end, 0, head, (sub, current))
        return JointSpanNode(node.start, node.end, label, head, current.children)

    root = build(nary)
    if root is None:
        return None
    if tree_dep_heads(root, len(dep_heads)) != list(dep_heads):
        return None  # derived arcs must reproduce the gold tree exactly
    return root


def joint_tree_spans(root: JointSpanNode) -> list[tuple[int, int, int]]:
    """(start, end, label index) for every node, DFS order."""
    out: list[tuple[int, int, int]] = []

    def walk(node: JointSpanNode) -> None:
        out.append((node.start, node.end, node.label))
        for child in node.children:
            walk(child)

    walk(root)
    return out


def joint_tree_to_constituents(
    root: JointSpanNode,
    index_to_label: Sequence[str],
    pos_tags: Sequence[str],
) -> ConstituentTree:
    """Recover an n-ary tree: placeholder nodes spliced out, joined labels
    re-expanded into unary chains, preterminals supplied from POS tags."""

    def convert(node: JointSpanNode) -> list[ConstituentTree]:
        if not node.children:
            leaf = ConstituentTree(
                label=pos_tags[node.start],
                children=(ConstituentTree(word=node.start),),
            )
            subtrees = [leaf]
        else:
            subtrees = []
            for child in node.children:
                subtrees.extend(convert(child))
        label = index_to_label[node.label] if node.label else ""
        if not label:
            return subtrees
        for part in reversed(label.split("+")):
            subtrees = [ConstituentTree(label=part, children=tuple(subtrees))]
        return subtrees

    top = convert(root)
    if len(top) == 1:
        return top[0]
    return ConstituentTree(label="TOP", children=tuple(top))


def validate_joint_tree(root: JointSpanNode, n: int) -> None:
    """Raise if structure invariants fail (used by fuzz tests)."""
    heads = [None] * n

    def walk(node: JointSpanNode) -> None:
        if not node.children:
            if node.start != node.end or node.head != node.start:
                raise ValueError("leaf must be its own single-word head")
            return
        left, right = node.children
        if (left.start, right.end) != (node.start, node.end) or left.end + 1 != right.start:
            raise ValueError("children must tile the parent span")
        if node.head not in (left.head, right.head):
            raise ValueError("node head must come from one child")
        walk(left)
        walk(right)

    if (root.start, root.end) != (0, n - 1):
        raise ValueError("root must cover the sentence")
    walk(root)
    arcs = derived_arcs(root)
    deps = [dep for dep, _ in arcs]
    if sorted(deps) != list(range(n)):
        raise ValueError("every word needs exactly one head")
