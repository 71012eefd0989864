"""Oriented link diagrams as plane-embedded combinatorial maps.

Conventions (used everywhere in this package):

* A crossing has four slots 0..3 in *counterclockwise* order. A dart is one
  edge-end at a crossing slot, encoded as the int ``4*crossing_id + slot``.
* Opposite slots ``{0,2}`` and ``{1,3}`` are the two strand passes through a
  crossing; ``Diagram.over[c]`` is 0 if the ``{0,2}`` pass is the over-strand
  and 1 if ``{1,3}`` is.
* ``sigma(d)`` is the next dart counterclockwise at the same crossing,
  ``theta(d)`` the other end of the same edge. Faces are the orbits of
  ``sigma . theta``; the face containing dart ``(c, s)`` owns the corner of
  ``c`` between slots ``s-1`` and ``s``.
* For a directed edge ``e`` (tail -> head), the face left of ``e`` is the
  face of its head dart and the face right of ``e`` is the face of its
  tail dart.
* Plane (not sphere) structure: each crossing-bearing component designates an
  outer face, and a nesting forest records which face of which component (or
  the inside of which free loop, or the unbounded plane) contains each
  component. Children never sit in a component's outer face.

Diagrams are immutable; all mutation happens through builders in the move
engine, which return fresh diagrams.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

# A Place names a region of the plane arrangement:
#   ("plane",)          the unbounded-most region
#   ("face", ref)       the face of a crossing component with min-dart `ref`,
#                       which must not be that component's outer face
#   ("loop", loop_id)   the disk inside a crossingless free loop
Place = tuple

PLANE: Place = ("plane",)


def face_place(ref: int) -> Place:
    return ("face", ref)


def loop_place(loop_id: int) -> Place:
    return ("loop", loop_id)


def dart(cid: int, slot: int) -> int:
    return 4 * cid + (slot & 3)


def dart_crossing(d: int) -> int:
    return d >> 2


def dart_slot(d: int) -> int:
    return d & 3


def sigma(d: int) -> int:
    """Next dart counterclockwise around the crossing."""
    return (d & ~3) | ((d + 1) & 3)


def sigma_inv(d: int) -> int:
    return (d & ~3) | ((d - 1) & 3)


def opposite(d: int) -> int:
    """The dart of the same strand pass on the far side of the crossing."""
    return (d & ~3) | ((d + 2) & 3)


@dataclass(frozen=True)
class FreeLoop:
    """A crossingless circle: where it sits and its travel direction.

    ``ccw`` is True when the curve runs counterclockwise as seen with its
    container region on the outside (winding number +1).
    """

    place: Place
    ccw: bool


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple = ()

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True, eq=False)
class Diagram:
    """An oriented link diagram with plane embedding data.

    ``over``: crossing id -> over-pass parity (0 or 1).
    ``etail``/``ehead``: edge id -> tail/head dart (direction = orientation).
    ``loops``: free-loop id -> FreeLoop.
    ``outer``: component id (min crossing id) -> outer face ref (min dart).
    ``nest``: component id -> Place of its container.
    Id counters only ever grow so entity provenance survives surgery chains.
    """

    over: Mapping[int, int]
    etail: Mapping[int, int]
    ehead: Mapping[int, int]
    loops: Mapping[int, FreeLoop] = field(default_factory=dict)
    outer: Mapping[int, int] = field(default_factory=dict)
    nest: Mapping[int, Place] = field(default_factory=dict)
    next_cid: int = 0
    next_eid: int = 0
    next_lid: int = 0

    # -- derived structure ------------------------------------------------

    @cached_property
    def dart_edge(self) -> dict:
        m = {}
        for e, t in self.etail.items():
            m[t] = e
            m[self.ehead[e]] = e
        return m

    def theta(self, d: int) -> int:
        e = self.dart_edge[d]
        t = self.etail[e]
        return self.ehead[e] if d == t else t

    def phi(self, d: int) -> int:
        """Face successor: sigma of the edge partner."""
        return sigma(self.theta(d))

    def is_head(self, d: int) -> bool:
        return self.ehead[self.dart_edge[d]] == d

    def is_over(self, d: int) -> bool:
        return (d & 1) == self.over[d >> 2]

    @cached_property
    def darts(self) -> tuple:
        return tuple(sorted(4 * c + s for c in self.over for s in range(4)))

    @cached_property
    def faces(self) -> tuple:
        """All faces as tuples of darts in trace order, sorted by min dart."""
        seen = set()
        out = []
        for d0 in self.darts:
            if d0 in seen:
                continue
            trace = []
            d = d0
            while d not in seen:
                seen.add(d)
                trace.append(d)
                d = self.phi(d)
            out.append(tuple(trace))
        out.sort(key=min)
        return tuple(out)

    @cached_property
    def face_of(self) -> dict:
        """Dart -> face ref (the minimum dart on its face)."""
        m = {}
        for f in self.faces:
            r = min(f)
            for d in f:
                m[d] = r
        return m

    @cached_property
    def face_darts(self) -> dict:
        return {min(f): f for f in self.faces}

    def left_face(self, e: int) -> int:
        return self.face_of[self.ehead[e]]

    def right_face(self, e: int) -> int:
        return self.face_of[self.etail[e]]

    @cached_property
    def comp_of(self) -> dict:
        """Crossing id -> component id (the min crossing id reachable)."""
        parent = {c: c for c in self.over}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e, t in self.etail.items():
            a, b = find(t >> 2), find(self.ehead[e] >> 2)
            if a != b:
                if a > b:
                    a, b = b, a
                parent[b] = a
        return {c: find(c) for c in self.over}

    @cached_property
    def components(self) -> dict:
        m: dict = {}
        for c, k in self.comp_of.items():
            m.setdefault(k, set()).add(c)
        return m

    def comp_of_face(self, ref: int) -> int:
        return self.comp_of[ref >> 2]

    def region_of_dart(self, d: int) -> Place:
        """The arrangement region on the corner side of dart d."""
        f = self.face_of[d]
        k = self.comp_of[f >> 2]
        if self.outer.get(k) == f:
            return self.nest[k]
        return face_place(f)

    def region_of_place(self, p: Place) -> Place:
        """Collapse a face-place to the region it denotes."""
        if p[0] == "face":
            k = self.comp_of[p[1] >> 2]
            if self.outer.get(k) == p[1]:
                return self.nest[k]
        return p

    @cached_property
    def region_members(self) -> dict:
        """Region -> sorted darts whose corner side lies in that region."""
        m: dict = {}
        for d in self.darts:
            m.setdefault(self.region_of_dart(d), []).append(d)
        for v in m.values():
            v.sort()
        return m

    def crossing_number(self) -> int:
        return len(self.over)

    # -- validation --------------------------------------------------------

    def validate(self) -> ValidationReport:
        bad = []
        ends: dict = {}
        for e in self.etail:
            t, h = self.etail[e], self.ehead[e]
            if t == h:
                bad.append(f"edge {e}: tail and head are the same dart")
            for d in (t, h):
                if (d >> 2) not in self.over or not 0 <= (d & 3) < 4:
                    bad.append(f"edge {e}: dart {d} has no crossing")
                elif d in ends:
                    bad.append(f"dart unmatched: dart {d} used by edges {ends[d]} and {e}")
                else:
                    ends[d] = e
        for c in self.over:
            for s in range(4):
                if 4 * c + s not in ends:
                    bad.append(f"dart unmatched: crossing {c} slot {s} not on any edge")
            if self.over[c] not in (0, 1):
                bad.append(f"crossing {c}: over parity {self.over[c]}")
        if bad:
            return ValidationReport(False, tuple(bad))

        for c in self.over:
            for s in (0, 1):
                a, b = 4 * c + s, 4 * c + s + 2
                if self.is_head(a) == self.is_head(b):
                    bad.append(
                        f"orientation: crossing {c} pass {{{s},{s + 2}}} is not one-in one-out"
                    )
        if bad:
            return ValidationReport(False, tuple(bad))

        # Euler: per component V - E + F = 2 (with E = 2V this is F = V + 2),
        # i.e. each component's map is spherical.
        fcount: dict = {}
        for f in self.faces:
            fcount[self.comp_of[min(f) >> 2]] = fcount.get(self.comp_of[min(f) >> 2], 0) + 1
        for k, cs in self.components.items():
            if fcount.get(k, 0) != len(cs) + 2:
                bad.append(f"component {k}: V-E+F = {len(cs) - 2 * len(cs) + fcount.get(k, 0)} != 2")
        if bad:
            return ValidationReport(False, tuple(bad))

        face_refs = set(self.face_darts)
        for k in self.components:
            if k not in self.outer:
                bad.append(f"component {k}: no outer face designated")
            elif self.outer[k] not in face_refs or self.comp_of[self.outer[k] >> 2] != k:
                bad.append(f"component {k}: outer face {self.outer[k]} is not one of its faces")
            if k not in self.nest:
                bad.append(f"component {k}: no nesting place")
        for k in self.outer:
            if k not in self.components:
                bad.append(f"outer designation for unknown component {k}")
        for k in self.nest:
            if k not in self.components:
                bad.append(f"nesting for unknown component {k}")
        if bad:
            return ValidationReport(False, tuple(bad))

        def check_place(owner: str, p: Place):
            if p == PLANE:
                return
            if p[0] == "face":
                ref = p[1]
                if ref not in face_refs:
                    bad.append(f"{owner}: container face {ref} does not exist")
                    return
                k = self.comp_of[ref >> 2]
                if self.outer.get(k) == ref:
                    bad.append(f"{owner}: nested in an outer face {ref}")
            elif p[0] == "loop":
                if p[1] not in self.loops:
                    bad.append(f"{owner}: container loop {p[1]} does not exist")
            else:
                bad.append(f"{owner}: malformed place {p!r}")

        for k, p in self.nest.items():
            check_place(f"component {k}", p)
        for l, lp in self.loops.items():
            check_place(f"loop {l}", lp.place)
        if bad:
            return ValidationReport(False, tuple(bad))

        # The containment relation must be a forest.
        def parent_node(p: Place):
            if p == PLANE:
                return None
            if p[0] == "face":
                return ("c", self.comp_of[p[1] >> 2])
            return ("l", p[1])

        nodes = [("c", k) for k in self.components] + [("l", l) for l in self.loops]
        for n0 in nodes:
            seen = {n0}
            n = n0
            while True:
                p = self.nest[n[1]] if n[0] == "c" else self.loops[n[1]].place
                nxt = parent_node(p)
                if nxt is None:
                    break
                if nxt in seen:
                    bad.append(f"nesting cycle through {n0}")
                    break
                seen.add(nxt)
                n = nxt
        return ValidationReport(not bad, tuple(bad))


class InvalidDiagramError(ValueError):
    pass


def require_valid(d: Diagram) -> Diagram:
    rep = d.validate()
    if not rep.ok:
        raise InvalidDiagramError("invalid input: " + "; ".join(rep.violations[:4]))
    return d


def trace_faces(d: Diagram) -> tuple:
    """Faces of all crossing components, each a cyclic dart tuple."""
    require_valid(d)
    return d.faces


def crossing_number(d: Diagram) -> int:
    require_valid(d)
    return d.crossing_number()


def validate(d: Diagram) -> ValidationReport:
    return d.validate()


# -- small constructors used by tests, fixtures and the CLI ----------------


def from_edges(
    over: Mapping[int, int],
    edges: Iterable[tuple],
    loops: Mapping[int, FreeLoop] | None = None,
    outer: Mapping[int, int] | None = None,
    nest: Mapping[int, Place] | None = None,
) -> Diagram:
    """Build a diagram from (edge_id, tail_dart, head_dart) triples.

    When ``outer``/``nest`` are omitted and the diagram is a single component,
    the outer face defaults to the face with the most darts (ties by min ref)
    and the component sits in the plane.
    """
    etail = {}
    ehead = {}
    for e, t, h in edges:
        etail[e] = t
        ehead[e] = h
    d = Diagram(
        over=dict(over),
        etail=etail,
        ehead=ehead,
        loops=dict(loops or {}),
        outer=dict(outer or {}),
        nest=dict(nest or {}),
        next_cid=max(over, default=-1) + 1,
        next_eid=max(etail, default=-1) + 1,
        next_lid=max(loops or {}, default=-1) + 1,
    )
    if outer is None and len(d.components) == 1 and d.over:
        k = min(d.components)
        best = max(d.faces, key=lambda f: (len(f), -min(f)))
        d = Diagram(
            over=d.over,
            etail=d.etail,
            ehead=d.ehead,
            loops=d.loops,
            outer={k: min(best)},
            nest={k: PLANE},
            next_cid=d.next_cid,
            next_eid=d.next_eid,
            next_lid=d.next_lid,
        )
    return d


def unknot_loop(ccw: bool = True) -> Diagram:
    return Diagram(over={}, etail={}, ehead={}, loops={0: FreeLoop(PLANE, ccw)}, next_lid=1)


def kinked_unknot(outer_small: bool = False) -> Diagram:
    """One-crossing unknot: a counterclockwise circle with an inward kink.

    Slots at the crossing: 0 = incoming main strand, 2 -> 3 the kink loop,
    1 = outgoing main strand. Faces: {1} (deg 1), {3} (monogon), {0,2}
    (deg 2). ``outer_small`` picks the plane embedding whose unbounded face
    is the degree-2 face instead.
    """
    over = {0: 0}
    edges = [(0, dart(0, 1), dart(0, 0)), (1, dart(0, 2), dart(0, 3))]
    outer = {0: dart(0, 0) if outer_small else dart(0, 1)}
    return from_edges(over, edges, outer=outer, nest={0: PLANE})


def trefoil(mirror: bool = False) -> Diagram:
    """Standard alternating 3-crossing trefoil diagram.

    Built as the closed braid of three positive (or negative) half-twists:
    crossing i receives the previous crossing's pass on slots 0/1 and sends
    it onward from slots 2/3.
    """
    over = {c: (1 if mirror else 0) for c in range(3)}
    edges = []
    eid = 0
    for c in range(3):
        n = (c + 1) % 3
        edges.append((eid, dart(c, 2), dart(n, 1)))
        eid += 1
        edges.append((eid, dart(c, 3), dart(n, 0)))
        eid += 1
    return from_edges(over, edges)
