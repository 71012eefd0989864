"""Canonical codes and equivalence of plane diagrams.

A component's code is the minimum, over all start darts on its outer face, of
the breadth-first dart labeling code (recording sigma, theta, over/under and
edge direction per dart) together with the placement of nested children by
face label. Whole-diagram codes canonicalize the nesting forest bottom-up, so
``canonical_code(d1) == canonical_code(d2)`` iff the diagrams are ambient
isotopic in the plane (orientation-preserving, outer faces and nesting
respected).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .diagram import Diagram, InvalidDiagramError, require_valid, sigma

_VERSION = b"rmc1:"


def _bfs_labels(d: Diagram, start: int) -> tuple:
    labels = {start: 0}
    order = [start]
    i = 0
    while i < len(order):
        x = order[i]
        i += 1
        for y in (sigma(x), d.theta(x)):
            if y not in labels:
                labels[y] = len(order)
                order.append(y)
    return labels, order


def _comp_candidate(d: Diagram, start: int, child_codes_by_face: dict) -> tuple:
    labels, order = _bfs_labels(d, start)
    seq = tuple(
        (labels[sigma(x)], labels[d.theta(x)], 1 if d.is_over(x) else 0, 1 if d.is_head(x) else 0)
        for x in order
    )
    entries = []
    for ref, codes in child_codes_by_face.items():
        lab = min(labels[x] for x in d.face_darts[ref])
        entries.append((lab, tuple(sorted(codes))))
    return (seq, tuple(sorted(entries))), labels


def _forest(d: Diagram) -> tuple:
    """Nodes ("c", comp) / ("l", loop), children grouped under their parents."""
    children: dict = {}
    roots = []

    def attach(node, place):
        if place[0] == "plane":
            roots.append(node)
        elif place[0] == "face":
            parent = ("c", d.comp_of[place[1] >> 2])
            children.setdefault(parent, []).append((place[1], node))
        else:
            children.setdefault(("l", place[1]), []).append((None, node))

    for k in d.components:
        attach(("c", k), d.nest[k])
    for l, lp in d.loops.items():
        attach(("l", l), lp.place)
    return roots, children


def _node_codes(d: Diagram):
    roots, children = _forest(d)
    memo: dict = {}

    def code(node):
        if node in memo:
            return memo[node]
        kids = children.get(node, [])
        if node[0] == "l":
            sub = tuple(sorted(code(n) for _, n in kids))
            res = ("L", 1 if d.loops[node[1]].ccw else 0, sub)
        else:
            by_face: dict = {}
            for ref, n in kids:
                by_face.setdefault(ref, []).append(code(n))
            starts = d.face_darts[d.outer[node[1]]]
            best = min(_comp_candidate(d, s, by_face)[0] for s in starts)
            res = ("C", best)
        memo[node] = res
        return res

    for r in roots:
        code(r)
    return roots, children, memo


def canonical_code(d: Diagram) -> bytes:
    require_valid(d)
    roots, _children, memo = _node_codes(d)
    top = tuple(sorted(memo[r] for r in roots))
    return _VERSION + repr(top).encode()


def is_equivalent(d1: Diagram, d2: Diagram) -> bool:
    return canonical_code(d1) == canonical_code(d2)


@dataclass
class Iso:
    """An explicit plane-diagram isomorphism d1 -> d2."""

    crossings: dict = field(default_factory=dict)
    edges: dict = field(default_factory=dict)
    loops: dict = field(default_factory=dict)
    darts: dict = field(default_factory=dict)

    def dart(self, x: int) -> int:
        return self.darts[x]

    def edge(self, e: int) -> int:
        return self.edges[e]


def diagram_isomorphism(d1: Diagram, d2: Diagram) -> Iso | None:
    """An explicit isomorphism between equivalent diagrams, else None."""
    try:
        require_valid(d1), require_valid(d2)
    except InvalidDiagramError:
        return None
    if canonical_code(d1) != canonical_code(d2):
        return None
    roots1, ch1, memo1 = _node_codes(d1)
    roots2, ch2, memo2 = _node_codes(d2)
    iso = Iso()

    def min_labeling(d: Diagram, node, children, memo):
        by_face: dict = {}
        for ref, n in children.get(node, []):
            by_face.setdefault(ref, []).append(memo[n])
        best = None
        best_labels = None
        for s in sorted(d.face_darts[d.outer[node[1]]]):
            cand, labels = _comp_candidate(d, s, by_face)
            if best is None or cand < best:
                best, best_labels = cand, labels
        return best_labels

    def face_by_min_label(d: Diagram, node, labels) -> dict:
        out = {}
        for ref, f in d.face_darts.items():
            if d.comp_of[ref >> 2] == node[1]:
                out[min(labels[x] for x in f)] = ref
        return out

    def match(n1, n2):
        if n1[0] == "l":
            iso.loops[n1[1]] = n2[1]
            pair_children(ch1.get(n1, []), ch2.get(n2, []), None, None)
            return
        lab1 = min_labeling(d1, n1, ch1, memo1)
        lab2 = min_labeling(d2, n2, ch2, memo2)
        inv2 = {v: k for k, v in lab2.items()}
        for x, v in lab1.items():
            y = inv2[v]
            iso.darts[x] = y
            iso.crossings[x >> 2] = y >> 2
            iso.edges[d1.dart_edge[x]] = d2.dart_edge[y]
        pair_children(ch1.get(n1, []), ch2.get(n2, []), (d1, n1, lab1), (d2, n2, lab2))

    def pair_children(kids1, kids2, side1, side2):
        if side1 is None:
            k1 = sorted(kids1, key=lambda rn: memo1[rn[1]])
            k2 = sorted(kids2, key=lambda rn: memo2[rn[1]])
            for (_, a), (_, b) in zip(k1, k2):
                match(a, b)
            return
        d1_, n1, lab1 = side1
        d2_, n2, lab2 = side2
        fmap2 = face_by_min_label(d2_, n2, lab2)
        by_key1: dict = {}
        for ref, n in kids1:
            key = min(lab1[x] for x in d1_.face_darts[ref])
            by_key1.setdefault(key, []).append(n)
        by_key2: dict = {}
        for ref, n in kids2:
            key = min(lab2[x] for x in d2_.face_darts[ref])
            by_key2.setdefault(key, []).append(n)
        for key, ns1 in by_key1.items():
            ns2 = by_key2[key]
            for a, b in zip(sorted(ns1, key=lambda n: memo1[n]), sorted(ns2, key=lambda n: memo2[n])):
                match(a, b)

    r1 = sorted(roots1, key=lambda n: memo1[n])
    r2 = sorted(roots2, key=lambda n: memo2[n])
    for a, b in zip(r1, r2):
        match(a, b)
    return iso
