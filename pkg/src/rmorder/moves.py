"""Reidemeister moves as combinatorial surgeries on diagrams.

Site encodings (matching the script file format):

* ``R1+``: anchor edge or free loop, ``side`` L/R (which side of the directed
  strand the monogon bulges into; L is a ccw curl) and ``sign`` o/u (whether
  the pass carrying the incoming strand crosses over).
* ``R1-``: monogon face ref.  ``R2-``: bigon face ref.  ``R3``: trigon ref.
* ``R2+``: over/under strand occurrences; for edges an (edge, side L/R)
  pair, for crossingless free loops a (loop, side O/I) pair (outer side or
  disk side).  The finger belongs to the over strand.  A push of a strand
  across its own occurrence carries ``coil`` (finger over/under itself) and
  ``hook`` f/b (curl toward head or tail).

Geometric conventions for the push layouts: the crossed strand runs west to
east through both new crossings when the shared region lies on its right
(else east to west); the finger crosses it northward on the way out and
southward on the way back; slots are indexed counterclockwise E,N,W,S.
The outgoing finger copy crosses west of the returning copy exactly when the
shared region lies on the mover's left.

Where a move splits a face that carries nested children, the children are
kept on the side witnessed by the mover occurrence (the finger hugs the
boundary arc from the mover to the target); the site cannot express finer
placement and any placement is realizable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .diagram import (
    PLANE,
    Diagram,
    FreeLoop,
    Place,
    dart,
    face_place,
    loop_place,
    opposite,
    require_valid,
    sigma,
    sigma_inv,
)

R1UP = "R1+"
R1DOWN = "R1-"
R2UP = "R2+"
R2DOWN = "R2-"
R3 = "R3"

KINDS = (R1UP, R1DOWN, R2UP, R2DOWN, R3)

DELTA_C = {R1UP: 1, R1DOWN: -1, R2UP: 2, R2DOWN: -2, R3: 0}

ORDER_BLOCKS = (R1UP, R2UP, R3, R2DOWN, R1DOWN)

_E, _N, _W, _S = 0, 1, 2, 3


class SiteError(ValueError):
    """A move site is not applicable; the message names the failed clause."""


@dataclass(frozen=True)
class Move:
    kind: str
    edge: int | None = None
    loop: int | None = None
    side: str | None = None
    sign: str | None = None
    face: int | None = None
    over_edge: int | None = None
    over_loop: int | None = None
    over_side: str | None = None
    under_edge: int | None = None
    under_loop: int | None = None
    under_side: str | None = None
    coil: str | None = None
    hook: str | None = None
    finger: str | None = None  # R2+: which strand makes the finger, o(ver)/u(nder)


@dataclass
class SiteRemap:
    crossings: dict = field(default_factory=dict)
    edges: dict = field(default_factory=dict)
    places: dict = field(default_factory=dict)
    created_crossings: tuple = ()
    created_edges: tuple = ()
    destroyed_crossings: tuple = ()
    destroyed_edges: tuple = ()
    created_loops: tuple = ()
    destroyed_loops: tuple = ()
    info: dict = field(default_factory=dict)

    def place(self, p: Place) -> Place:
        if p in self.places:
            q = self.places[p]
            if q is None:
                raise KeyError(f"place {p!r} vanished")
            return q
        return p


def occurrence_dart(d: Diagram, edge: int, side: str) -> int:
    """Dart identifying an (edge, side) occurrence; R = tail side, L = head."""
    if side == "R":
        return d.etail[edge]
    if side == "L":
        return d.ehead[edge]
    raise SiteError(f"site not applicable: bad side {side!r}")


def dart_side(d: Diagram, x: int) -> str:
    return "R" if d.etail[d.dart_edge[x]] == x else "L"


def _region_empty(d: Diagram, ref: int) -> bool:
    """The face bounds a disk containing nothing else.

    A reduction move needs a disk meeting the diagram in the local picture
    only, so the face must not carry nested components and must not be its
    component's outer face (its region would then reach everything outside,
    including the unbounded one).
    """
    if d.outer.get(d.comp_of[ref >> 2]) == ref:
        return False
    p = face_place(ref)
    if any(pl == p for pl in d.nest.values()):
        return False
    return all(lp.place != p for lp in d.loops.values())


# ---------------------------------------------------------------------------
# workspace + plane-structure finalizer
# ---------------------------------------------------------------------------


class _Work:
    def __init__(self, d: Diagram):
        self.pre = d
        self.over = dict(d.over)
        self.etail = dict(d.etail)
        self.ehead = dict(d.ehead)
        self.loops = dict(d.loops)
        self.next_cid = d.next_cid
        self.next_eid = d.next_eid
        self.next_lid = d.next_lid
        self.created_c: list = []
        self.created_e: list = []
        self.destroyed_c: list = []
        self.destroyed_e: list = []
        self.created_l: list = []
        self.destroyed_l: list = []
        self.edge_map: dict = {}

    def new_crossing(self, parity: int) -> int:
        c = self.next_cid
        self.next_cid += 1
        self.over[c] = parity
        self.created_c.append(c)
        return c

    def new_edge(self, tail: int, head: int) -> int:
        e = self.next_eid
        self.next_eid += 1
        self.etail[e] = tail
        self.ehead[e] = head
        self.created_e.append(e)
        return e

    def del_edge(self, e: int):
        del self.etail[e], self.ehead[e]
        self.destroyed_e.append(e)

    def del_crossing(self, c: int):
        del self.over[c]
        self.destroyed_c.append(c)

    def del_loop(self, l: int):
        del self.loops[l]
        self.destroyed_l.append(l)

    def new_loop(self, rec: FreeLoop) -> int:
        l = self.next_lid
        self.next_lid += 1
        self.loops[l] = rec
        self.created_l.append(l)
        return l

    def core(self) -> Diagram:
        return Diagram(
            over=dict(self.over),
            etail=dict(self.etail),
            ehead=dict(self.ehead),
            loops=dict(self.loops),
            outer={},
            nest={},
            next_cid=self.next_cid,
            next_eid=self.next_eid,
            next_lid=self.next_lid,
        )


def _finalize(
    w: _Work,
    anchors: dict | None = None,
    forced: dict | None = None,
    place_overrides: dict | None = None,
    outer_overrides: dict | None = None,
    nest_overrides: dict | None = None,
) -> tuple:
    """Assemble the post diagram, re-resolving all referenced plane places.

    ``anchors``: pre face ref -> ordered post-dart witnesses (defaults to the
    face's own darts).  ``forced``: pre face ref -> post Place or
    ("pre", Place) for deferred re-resolution (collapse interiors/ambients).
    ``place_overrides``: whole-place rewrites, e.g. a destroyed loop's disk.
    """
    pre = w.pre
    anchors = anchors or {}
    forced = forced or {}
    place_overrides = place_overrides or {}
    outer_overrides = outer_overrides or {}
    nest_overrides = nest_overrides or {}

    post = w.core()
    post_darts = set(post.dart_edge)

    face_res: dict = {}

    def resolve_ref(ref: int, depth: int = 0):
        if ref in face_res:
            return face_res[ref]
        if depth > 8:
            return None
        out = None
        if ref in forced:
            v = forced[ref]
            out = resolve_place(v[1], depth + 1) if v and v[0] == "pre" else v
        else:
            cands = anchors.get(ref)
            if cands is None:
                cands = list(pre.face_darts[ref])
            for x in cands:
                if x in post_darts:
                    out = face_place(post.face_of[x])
                    break
        face_res[ref] = out
        return out

    def resolve_place(p: Place, depth: int = 0):
        if p in place_overrides:
            return place_overrides[p]
        if p[0] == "face":
            return resolve_ref(p[1], depth)
        return p

    post_outer: dict = {}
    comp_sources: dict = {}
    for c in post.over:
        if c in pre.over:
            comp_sources.setdefault(post.comp_of[c], set()).add(pre.comp_of[c])

    def pre_inside(p_comp, q_comp):
        node = pre.nest[p_comp]
        seen = 0
        while node != PLANE and seen < 64:
            seen += 1
            if node[0] == "face":
                owner = pre.comp_of[node[1] >> 2]
                if owner == q_comp:
                    return True
                node = pre.nest[owner]
            else:
                node = pre.loops[node[1]].place
        return False

    for k in post.components:
        if k in outer_overrides:
            post_outer[k] = outer_overrides[k]
            continue
        cands = []
        for p in sorted(comp_sources.get(k, ())):
            r = resolve_ref(pre.outer[p])
            if r is not None and r[0] == "face" and post.comp_of[r[1] >> 2] == k:
                cands.append((p, r[1]))
        if not cands:
            raise SiteError(f"internal: no outer face resolved for component {k}")
        if len({f for _, f in cands}) == 1:
            post_outer[k] = cands[0][1]
        else:
            ps = [p for p, _ in cands]
            chosen = ps[0]
            for p in ps:
                if not any(pre_inside(p, q) for q in ps if q != p):
                    chosen = p
                    break
            post_outer[k] = dict(cands)[chosen]

    post_nest: dict = {}
    for k in post.components:
        if k in nest_overrides:
            post_nest[k] = nest_overrides[k]
            continue
        srcs = sorted(comp_sources.get(k, ()))
        if not srcs:
            raise SiteError(f"internal: no nest source for component {k}")
        p = resolve_place(pre.nest[srcs[0]])
        if p is None:
            raise SiteError(f"internal: nest of component {k} resolved nowhere")
        post_nest[k] = p

    loops_post = {}
    for l, rec in w.loops.items():
        p = resolve_place(rec.place)
        if p is None:
            raise SiteError(f"internal: loop {l} place resolved nowhere")
        loops_post[l] = FreeLoop(p, rec.ccw)

    def collapse(p: Place, guard: int = 0) -> Place:
        if p is not None and p[0] == "face" and guard < 64:
            k = post.comp_of[p[1] >> 2]
            if post_outer.get(k) == p[1]:
                return collapse(post_nest[k], guard + 1)
        return p

    post_nest = {k: collapse(p) for k, p in post_nest.items()}
    loops_post = {l: FreeLoop(collapse(r.place), r.ccw) for l, r in loops_post.items()}

    result = Diagram(
        over=dict(w.over),
        etail=dict(w.etail),
        ehead=dict(w.ehead),
        loops=loops_post,
        outer=post_outer,
        nest=post_nest,
        next_cid=w.next_cid,
        next_eid=w.next_eid,
        next_lid=w.next_lid,
    )

    places = {}
    for ref in pre.face_darts:
        places[face_place(ref)] = collapse(resolve_ref(ref))
    for p, q in place_overrides.items():
        places[p] = collapse(q)

    remap = SiteRemap(
        crossings={c: (c if c in result.over else None) for c in pre.over},
        edges={
            e: w.edge_map.get(e, (e,) if e in result.etail else None)
            for e in pre.etail
        },
        places=places,
        created_crossings=tuple(w.created_c),
        created_edges=tuple(w.created_e),
        destroyed_crossings=tuple(w.destroyed_c),
        destroyed_edges=tuple(w.destroyed_e),
        created_loops=tuple(w.created_l),
        destroyed_loops=tuple(w.destroyed_l),
    )
    return result, remap


# ---------------------------------------------------------------------------
# shared reduction helpers
# ---------------------------------------------------------------------------


def _remove_crossings(w: _Work, removed: set) -> tuple:
    """Splice strands through removed crossings.

    Returns (chains, circles): chains as (new_edge_id, [old edges in curve
    order]), circles as [old edges in cycle order] (loops created by caller).
    """
    pre = w.pre
    part = [
        e
        for e in pre.etail
        if (pre.etail[e] >> 2) in removed or (pre.ehead[e] >> 2) in removed
    ]

    def nxt(e):
        h = pre.ehead[e]
        if (h >> 2) not in removed:
            return None
        return pre.dart_edge[opposite(h)]

    chains = []
    circles = []
    seen = set()
    for e in sorted(part):
        if e in seen or (pre.etail[e] >> 2) in removed:
            continue
        chain = [e]
        seen.add(e)
        cur = e
        while True:
            n = nxt(cur)
            if n is None:
                break
            chain.append(n)
            seen.add(n)
            cur = n
        for old in chain:
            w.del_edge(old)
        ne = w.new_edge(pre.etail[chain[0]], pre.ehead[chain[-1]])
        for old in chain:
            w.edge_map[old] = (ne,)
        chains.append((ne, chain))
    for e in sorted(part):
        if e in seen:
            continue
        cyc = [e]
        seen.add(e)
        cur = nxt(e)
        while cur != e:
            cyc.append(cur)
            seen.add(cur)
            cur = nxt(cur)
        for old in cyc:
            w.del_edge(old)
        circles.append(cyc)
    for c in sorted(removed):
        w.del_crossing(c)
    return chains, circles


def _jordan_sides(pre: Diagram, cycle_edges: list, extra_unions=()) -> tuple:
    """The two sides of a closed strand, as sets of pre face refs.

    Faces are merged across every edge not on the strand plus any explicit
    extra pairs (the separation channels of the move).  Returns
    (left_root, right_root, class_of).
    """
    cyc = set(cycle_edges)
    parent = {ref: ref for ref in pre.face_darts}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        a, b = find(a), find(b)
        if a != b:
            parent[max(a, b)] = min(a, b)

    for e in pre.etail:
        if e not in cyc:
            union(pre.left_face(e), pre.right_face(e))
    for a, b in extra_unions:
        union(a, b)
    class_of = {ref: find(ref) for ref in pre.face_darts}
    e0 = cycle_edges[0]
    return class_of[pre.left_face(e0)], class_of[pre.right_face(e0)], class_of


def _circle_records(w: _Work, pre: Diagram, circles: list, extra_unions=()) -> list:
    """Create FreeLoops for collapsed strands and classify their sides."""
    infos = []
    for cyc in circles:
        comp = pre.comp_of[pre.etail[cyc[0]] >> 2]
        left, right, class_of = _jordan_sides(pre, cyc, extra_unions)
        o_cls = class_of[pre.outer[comp]]
        if o_cls == left:
            interior, exterior = right, left
        elif o_cls == right:
            interior, exterior = left, right
        else:
            raise SiteError("internal: collapsed circle has no outer side")
        ccw = interior == left
        lid = w.new_loop(FreeLoop(PLANE, ccw))
        infos.append(
            {
                "lid": lid,
                "interior": interior,
                "exterior": exterior,
                "class_of": class_of,
                "edges": cyc,
                "comp": comp,
            }
        )
    for info in infos:
        info["parent"] = None
        rep = pre.left_face(info["edges"][0])
        if info["class_of"][rep] != info["exterior"]:
            rep = pre.right_face(info["edges"][0])
        for other in infos:
            if other is not info and other["class_of"][rep] == other["interior"]:
                info["parent"] = other["lid"]
    return infos


def _force_circle_interiors(pre: Diagram, infos: list, forced: dict, alive_darts):
    """Anchorless interior-class faces of collapsed circles go to the
    innermost enclosing new loop; faces with surviving darts resolve normally
    (their region collapses onto the loop place through outer-face nesting).
    """
    for ref in pre.face_darts:
        if any(x in alive_darts for x in pre.face_darts[ref]):
            continue
        holders = [i for i in infos if i["class_of"][ref] == i["interior"]]
        if not holders:
            continue
        chosen = holders[0]
        for i in holders:
            if i["parent"] is not None and any(j["lid"] == i["parent"] for j in holders):
                chosen = i
        forced[ref] = loop_place(chosen["lid"])


def _loop_container_place(pre: Diagram, info: dict, remap_places: dict) -> Place:
    if info["parent"] is not None:
        return loop_place(info["parent"])
    rep = pre.left_face(info["edges"][0])
    if info["class_of"][rep] != info["exterior"]:
        rep = pre.right_face(info["edges"][0])
    p = remap_places.get(face_place(rep))
    if p is not None:
        return p
    return remap_places.get(pre.nest[info["comp"]], pre.nest[info["comp"]])


# ---------------------------------------------------------------------------
# R1 up
# ---------------------------------------------------------------------------


def _apply_r1up(d: Diagram, m: Move) -> tuple:
    if (m.edge is None) == (m.loop is None):
        raise SiteError("site not applicable: R1+ needs exactly one of edge/loop")
    if m.side not in ("L", "R") or m.sign not in ("o", "u"):
        raise SiteError("site not applicable: R1+ side/sign")
    w = _Work(d)
    parity = 0 if m.sign == "o" else 1
    x = w.new_crossing(parity)
    curl_head = 3 if m.side == "L" else 1
    cont = 1 if m.side == "L" else 3
    mono_dart_slot = 3 if m.side == "L" else 2
    if m.edge is not None:
        if m.edge not in d.etail:
            raise SiteError("site not applicable: no such edge")
        t, h = d.etail[m.edge], d.ehead[m.edge]
        w.del_edge(m.edge)
        e1 = w.new_edge(t, dart(x, 0))
        el = w.new_edge(dart(x, 2), dart(x, curl_head))
        e2 = w.new_edge(dart(x, cont), h)
        w.edge_map[m.edge] = (e1, el, e2)
        post, remap = _finalize(w)
        remap.info = {
            "monogon": post.face_of[dart(x, mono_dart_slot)],
            "kink_crossing": x,
            "pieces": (e1, el, e2),
        }
        return post, remap
    if m.loop not in d.loops:
        raise SiteError("site not applicable: no such loop")
    rec = d.loops[m.loop]
    el = w.new_edge(dart(x, 2), dart(x, curl_head))
    e2 = w.new_edge(dart(x, cont), dart(x, 0))
    w.del_loop(m.loop)
    core = w.core()
    if rec.ccw:
        outer_ref = core.face_of[core.etail[e2]]
        inner_ref = core.face_of[core.ehead[e2]]
    else:
        outer_ref = core.face_of[core.ehead[e2]]
        inner_ref = core.face_of[core.etail[e2]]
    post, remap = _finalize(
        w,
        place_overrides={loop_place(m.loop): face_place(inner_ref)},
        outer_overrides={x: outer_ref},
        nest_overrides={x: rec.place},
    )
    remap.info = {
        "monogon": post.face_of[dart(x, mono_dart_slot)],
        "kink_crossing": x,
        "pieces": (el, e2),
    }
    return post, remap


# ---------------------------------------------------------------------------
# R1 down
# ---------------------------------------------------------------------------


def _kink_data(d: Diagram, ref: int) -> tuple:
    f = d.face_darts.get(ref)
    if f is None or len(f) != 1:
        raise SiteError("site not applicable: face is not a monogon")
    mdart = f[0]
    x = mdart >> 2
    lo = d.dart_edge[mdart]
    if (d.theta(mdart) >> 2) != x:
        raise SiteError("site not applicable: face is not a kink monogon")
    return mdart, x, lo


def _apply_r1down(d: Diagram, mv: Move) -> tuple:
    mdart, x, lo = _kink_data(d, mv.face)
    if not _region_empty(d, mv.face):
        raise SiteError("site not applicable: monogon is not empty")
    lt, lh = d.etail[lo], d.ehead[lo]
    side = "L" if lh == sigma(lt) else "R"
    in_dart = next(
        dart(x, s)
        for s in range(4)
        if dart(x, s) not in (lt, lh) and d.is_head(dart(x, s))
    )
    out_dart = opposite(lt) if opposite(lt) != in_dart else opposite(lh)
    sign = "o" if d.is_over(in_dart) else "u"
    collar_ref = d.face_of[d.theta(mdart)]
    short_ref = d.face_of[out_dart] if side == "L" else d.face_of[in_dart]

    w = _Work(d)
    chains, circles = _remove_crossings(w, {x})
    anchors: dict = {}
    forced: dict = {}

    if circles:
        # single-crossing component straightens into a free loop
        comp = d.comp_of[x]
        comp_faces = [r for r in d.face_darts if d.comp_of[r >> 2] == comp]
        others = [r for r in comp_faces if r != short_ref]
        left_side = others if side == "L" else [short_ref]
        if d.outer[comp] == short_ref:
            interior = others
        else:
            interior = [short_ref]
        ccw = interior == left_side
        lid = w.new_loop(FreeLoop(PLANE, ccw))
        for r in interior:
            forced[r] = loop_place(lid)
        ambient = ("pre", d.nest[comp])
        for r in comp_faces:
            if r not in forced:
                forced[r] = ambient
        post, remap = _finalize(w, anchors=anchors, forced=forced)
        amb = remap.places.get(d.nest[comp], d.nest[comp])
        rec = post.loops[lid]
        post = Diagram(
            over=post.over,
            etail=post.etail,
            ehead=post.ehead,
            loops={**post.loops, lid: FreeLoop(amb, rec.ccw)},
            outer=post.outer,
            nest=post.nest,
            next_cid=post.next_cid,
            next_eid=post.next_eid,
            next_lid=post.next_lid,
        )
        remap.info = {
            "inverse": Move(R1UP, loop=lid, side=side, sign=sign),
            "removed_crossing": x,
        }
        return post, remap

    ne = chains[0][0]
    fallback = w.ehead[ne] if side == "L" else w.etail[ne]
    other_fb = w.etail[ne] if side == "L" else w.ehead[ne]
    surv = [y for y in d.face_darts[collar_ref] if (y >> 2) != x]
    anchors[collar_ref] = surv + [fallback]
    anchors[mv.face] = surv + [fallback]
    anchors[short_ref] = [
        y for y in d.face_darts[short_ref] if (y >> 2) != x
    ] + [other_fb]
    post, remap = _finalize(w, anchors=anchors, forced=forced)
    remap.info = {
        "inverse": Move(R1UP, edge=ne, side=side, sign=sign),
        "removed_crossing": x,
    }
    return post, remap


# ---------------------------------------------------------------------------
# R2 up: pushes of one strand occurrence across another
# ---------------------------------------------------------------------------


def _strand_region(d: Diagram, s: tuple) -> Place:
    if s[0] == "e":
        return d.region_of_dart(s[1])
    lid, inner = s[1], s[2]
    return loop_place(lid) if inner else d.loops[lid].place


def _strand_region_left(d: Diagram, s: tuple) -> bool:
    """Is the shared region on the strand's left at this occurrence?"""
    if s[0] == "e":
        return s[1] == d.ehead[d.dart_edge[s[1]]]
    lid, inner = s[1], s[2]
    ccw = d.loops[lid].ccw
    return ccw if inner else not ccw


def push_strand(
    d: Diagram,
    mover: tuple,
    target: tuple,
    mover_over: bool,
    hook: str = "f",
) -> tuple:
    """Push a finger of `mover` across `target` (type-2 raise).

    Strand occurrences are ("e", dart) or ("l", loop_id, inner: bool).
    Returns (post, remap, tip_edge, tip_far_dart, move_record).
    """
    require_valid(d)
    rm = _strand_region(d, mover)
    rt = _strand_region(d, target)
    if rm != rt:
        raise SiteError("site not applicable: occurrences do not share a region")
    w = _Work(d)
    parity = 1 if mover_over else 0
    x_out = w.new_crossing(parity)
    x_back = w.new_crossing(parity)
    anchors: dict = {}
    place_overrides: dict = {}
    outer_overrides: dict = {}
    nest_overrides: dict = {}

    self_push = mover == target
    if self_push and hook not in ("f", "b"):
        raise SiteError("site not applicable: self push needs hook f/b")

    if mover[0] == "e" and target[0] == "e" and not self_push:
        dm, dt = mover[1], target[1]
        em, et = d.dart_edge[dm], d.dart_edge[dt]
        out_west = _strand_region_left(d, mover)
        et_east = not _strand_region_left(d, target)
        if em != et:
            x_w, x_e = (x_out, x_back) if out_west else (x_back, x_out)
            a1 = w.new_edge(d.etail[em], dart(x_out, _S))
            a2 = w.new_edge(dart(x_out, _N), dart(x_back, _N))
            a3 = w.new_edge(dart(x_back, _S), d.ehead[em])
            if et_east:
                u1 = w.new_edge(d.etail[et], dart(x_w, _W))
                u2 = w.new_edge(dart(x_w, _E), dart(x_e, _W))
                u3 = w.new_edge(dart(x_e, _E), d.ehead[et])
            else:
                u1 = w.new_edge(d.etail[et], dart(x_e, _E))
                u2 = w.new_edge(dart(x_e, _W), dart(x_w, _E))
                u3 = w.new_edge(dart(x_w, _W), d.ehead[et])
            w.del_edge(em)
            w.del_edge(et)
            w.edge_map[em] = (a1, a2, a3)
            w.edge_map[et] = (u1, u2, u3)
            tip = a2
        else:
            # the edge's two sides share the region
            e = em
            t, h = d.etail[e], d.ehead[e]
            w.del_edge(e)
            if dm == h:
                p1 = w.new_edge(t, dart(x_out, _W))
                p2 = w.new_edge(dart(x_out, _E), dart(x_back, _W))
                p3 = w.new_edge(dart(x_back, _E), dart(x_out, _S))
                p4 = w.new_edge(dart(x_out, _N), dart(x_back, _N))
                p5 = w.new_edge(dart(x_back, _S), h)
                w.edge_map[e] = (p1, p2, p3, p4, p5)
                tip = p4
            else:
                z1 = w.new_edge(t, dart(x_out, _S))
                z2 = w.new_edge(dart(x_out, _N), dart(x_back, _N))
                z3 = w.new_edge(dart(x_back, _S), dart(x_out, _E))
                z4 = w.new_edge(dart(x_out, _W), dart(x_back, _E))
                z5 = w.new_edge(dart(x_back, _W), h)
                w.edge_map[e] = (z1, z2, z3, z4, z5)
                tip = z2
        far = w.ehead[tip] if out_west else w.etail[tip]
        anchors[d.face_of[dt]] = [dt]
        anchors[d.face_of[dm]] = [dm]

    elif self_push and mover[0] == "e":
        dm = mover[1]
        e = d.dart_edge[dm]
        t, h = d.etail[e], d.ehead[e]
        east = dm == t
        fwd = hook == "f"
        w.del_edge(e)
        if east and fwd:
            p = [
                w.new_edge(t, dart(x_out, _S)),
                w.new_edge(dart(x_out, _N), dart(x_back, _N)),
                w.new_edge(dart(x_back, _S), dart(x_back, _W)),
                w.new_edge(dart(x_back, _E), dart(x_out, _W)),
                w.new_edge(dart(x_out, _E), h),
            ]
            tip = p[1]
        elif east and not fwd:
            p = [
                w.new_edge(t, dart(x_back, _W)),
                w.new_edge(dart(x_back, _E), dart(x_out, _W)),
                w.new_edge(dart(x_out, _E), dart(x_out, _S)),
                w.new_edge(dart(x_out, _N), dart(x_back, _N)),
                w.new_edge(dart(x_back, _S), h),
            ]
            tip = p[3]
        elif not east and fwd:
            p = [
                w.new_edge(t, dart(x_out, _S)),
                w.new_edge(dart(x_out, _N), dart(x_back, _N)),
                w.new_edge(dart(x_back, _S), dart(x_back, _E)),
                w.new_edge(dart(x_back, _W), dart(x_out, _E)),
                w.new_edge(dart(x_out, _W), h),
            ]
            tip = p[1]
        else:
            p = [
                w.new_edge(t, dart(x_back, _E)),
                w.new_edge(dart(x_back, _W), dart(x_out, _E)),
                w.new_edge(dart(x_out, _W), dart(x_out, _S)),
                w.new_edge(dart(x_out, _N), dart(x_back, _N)),
                w.new_edge(dart(x_back, _S), h),
            ]
            tip = p[3]
        w.edge_map[e] = tuple(p)
        far = w.etail[tip] if east else w.ehead[tip]
        anchors[d.face_of[dm]] = [dm]

    elif self_push and mover[0] == "l":
        lid, inner = mover[1], mover[2]
        rec = d.loops[lid]
        east = (rec.ccw and not inner) or (not rec.ccw and inner)
        fwd = hook == "f"
        w.del_loop(lid)
        if east and fwd:
            body = w.new_edge(dart(x_out, _E), dart(x_out, _S))
            tip = w.new_edge(dart(x_out, _N), dart(x_back, _N))
            w.new_edge(dart(x_back, _S), dart(x_back, _W))
            w.new_edge(dart(x_back, _E), dart(x_out, _W))
        elif east and not fwd:
            body = w.new_edge(dart(x_back, _S), dart(x_back, _W))
            w.new_edge(dart(x_back, _E), dart(x_out, _W))
            w.new_edge(dart(x_out, _E), dart(x_out, _S))
            tip = w.new_edge(dart(x_out, _N), dart(x_back, _N))
        elif not east and fwd:
            body = w.new_edge(dart(x_out, _W), dart(x_out, _S))
            tip = w.new_edge(dart(x_out, _N), dart(x_back, _N))
            w.new_edge(dart(x_back, _S), dart(x_back, _E))
            w.new_edge(dart(x_back, _W), dart(x_out, _E))
        else:
            body = w.new_edge(dart(x_back, _S), dart(x_back, _E))
            w.new_edge(dart(x_back, _W), dart(x_out, _E))
            w.new_edge(dart(x_out, _W), dart(x_out, _S))
            tip = w.new_edge(dart(x_out, _N), dart(x_back, _N))
        far = w.etail[tip] if east else w.ehead[tip]
        core = w.core()
        k_new = core.comp_of[x_out]
        inner_dart = w.ehead[body] if rec.ccw else w.etail[body]
        outer_dart = w.etail[body] if rec.ccw else w.ehead[body]
        place_overrides[loop_place(lid)] = face_place(core.face_of[inner_dart])
        outer_overrides[k_new] = core.face_of[outer_dart]
        nest_overrides[k_new] = rec.place

    else:
        # mixed or loop-loop pushes
        out_west = _strand_region_left(d, mover)
        et_east = not _strand_region_left(d, target)
        x_w, x_e = (x_out, x_back) if out_west else (x_back, x_out)
        if mover[0] == "l":
            l1, inner1 = mover[1], mover[2]
            rec1 = d.loops[l1]
            w.del_loop(l1)
            body = w.new_edge(dart(x_back, _S), dart(x_out, _S))
            tip = w.new_edge(dart(x_out, _N), dart(x_back, _N))
        else:
            dm = mover[1]
            em = d.dart_edge[dm]
            a1 = w.new_edge(d.etail[em], dart(x_out, _S))
            tip = w.new_edge(dart(x_out, _N), dart(x_back, _N))
            a3 = w.new_edge(dart(x_back, _S), d.ehead[em])
            w.del_edge(em)
            w.edge_map[em] = (a1, tip, a3)
            anchors[d.face_of[dm]] = [dm]
        if target[0] == "l":
            l2, inner2 = target[1], target[2]
            rec2 = d.loops[l2]
            w.del_loop(l2)
            if et_east:
                mid = w.new_edge(dart(x_w, _E), dart(x_e, _W))
                around = w.new_edge(dart(x_e, _E), dart(x_w, _W))
            else:
                mid = w.new_edge(dart(x_e, _W), dart(x_w, _E))
                around = w.new_edge(dart(x_w, _W), dart(x_e, _E))
        else:
            dt = target[1]
            et = d.dart_edge[dt]
            if et_east:
                u1 = w.new_edge(d.etail[et], dart(x_w, _W))
                u2 = w.new_edge(dart(x_w, _E), dart(x_e, _W))
                u3 = w.new_edge(dart(x_e, _E), d.ehead[et])
            else:
                u1 = w.new_edge(d.etail[et], dart(x_e, _E))
                u2 = w.new_edge(dart(x_e, _W), dart(x_w, _E))
                u3 = w.new_edge(dart(x_w, _W), d.ehead[et])
            w.del_edge(et)
            w.edge_map[et] = (u1, u2, u3)
            anchors[d.face_of[dt]] = [dt]
        far = w.ehead[tip] if out_west else w.etail[tip]
        core = w.core()
        k_new = core.comp_of[x_out]
        if mover[0] == "l":
            inner1_dart = w.ehead[body] if rec1.ccw else w.etail[body]
            ext1_dart = w.etail[body] if rec1.ccw else w.ehead[body]
            place_overrides[loop_place(l1)] = face_place(core.face_of[inner1_dart])
            if inner1:
                # the mover loop enclosed the target; it bounds the component now
                outer_overrides[k_new] = core.face_of[ext1_dart]
                nest_overrides[k_new] = rec1.place
        if target[0] == "l":
            ext2_dart = w.etail[around] if rec2.ccw else w.ehead[around]
            if inner2:
                # pushed from inside the target loop toward its container
                witness = mover[1] if mover[0] == "e" else ext1_dart
                place_overrides[loop_place(l2)] = face_place(core.face_of[witness])
                outer_overrides[k_new] = core.face_of[ext2_dart]
                nest_overrides[k_new] = rec2.place
            else:
                place_overrides[loop_place(l2)] = face_place(core.face_of[far])
        if (
            mover[0] == "l"
            and not inner1
            and (target[0] == "l" and not inner2)
            and k_new not in outer_overrides
        ):
            # two free loops joined side by side in their shared region
            outer_overrides[k_new] = core.face_of[ext1_dart]
            nest_overrides[k_new] = rec1.place

    def entity(s):
        if s[0] == "e":
            eid = d.dart_edge[s[1]]
            return dict(edge=eid, side=dart_side(d, s[1]))
        return dict(loop=s[1], side="I" if s[2] else "O")

    me, te = entity(mover), entity(target)
    if self_push:
        record = Move(
            R2UP,
            over_edge=me.get("edge"),
            over_loop=me.get("loop"),
            over_side=me["side"],
            under_edge=te.get("edge"),
            under_loop=te.get("loop"),
            under_side=te["side"],
            coil="o" if mover_over else "u",
            hook=hook,
        )
    elif mover_over:
        record = Move(
            R2UP,
            over_edge=me.get("edge"),
            over_loop=me.get("loop"),
            over_side=me["side"],
            under_edge=te.get("edge"),
            under_loop=te.get("loop"),
            under_side=te["side"],
            finger="o",
        )
    else:
        record = Move(
            R2UP,
            over_edge=te.get("edge"),
            over_loop=te.get("loop"),
            over_side=te["side"],
            under_edge=me.get("edge"),
            under_loop=me.get("loop"),
            under_side=me["side"],
            finger="u",
        )

    post, remap = _finalize(
        w,
        anchors=anchors,
        place_overrides=place_overrides,
        outer_overrides=outer_overrides,
        nest_overrides=nest_overrides,
    )
    rep = post.validate()
    if not rep.ok:
        raise SiteError("internal: push produced invalid diagram: " + rep.violations[0])
    bigon_dart = w.ehead[tip] if far == w.etail[tip] else w.etail[tip]
    if post.face_of[far] == post.face_of[bigon_dart]:
        raise SiteError("internal: push tip landed in its own bigon")
    remap.info = {
        "bigon": post.face_of[bigon_dart],
        "tip": tip,
        "tip_far_dart": far,
        "crossings": (x_out, x_back),
    }
    return post, remap, tip, far, record


def _move_strand(d: Diagram, which: str, m: Move) -> tuple:
    e = getattr(m, f"{which}_edge")
    l = getattr(m, f"{which}_loop")
    s = getattr(m, f"{which}_side")
    if (e is None) == (l is None):
        raise SiteError(f"site not applicable: R2+ {which} needs an edge or a loop")
    if e is not None:
        if e not in d.etail:
            raise SiteError("site not applicable: no such edge")
        return ("e", occurrence_dart(d, e, s))
    if l not in d.loops:
        raise SiteError("site not applicable: no such loop")
    if s not in ("O", "I"):
        raise SiteError("site not applicable: loop side must be O or I")
    return ("l", l, s == "I")


def _apply_r2up(d: Diagram, m: Move) -> tuple:
    over = _move_strand(d, "over", m)
    under = _move_strand(d, "under", m)
    if over == under:
        if m.coil not in ("o", "u") or m.hook not in ("f", "b"):
            raise SiteError("site not applicable: self push needs coil and hook")
        post, remap, *_ = push_strand(d, over, under, m.coil == "o", m.hook)
    elif m.finger == "u":
        post, remap, *_ = push_strand(d, under, over, False)
    else:
        post, remap, *_ = push_strand(d, over, under, True)
    return post, remap


# ---------------------------------------------------------------------------
# R2 down
# ---------------------------------------------------------------------------


def _bigon_data(d: Diagram, ref: int) -> tuple:
    f = d.face_darts.get(ref)
    if f is None or len(f) != 2:
        raise SiteError("site not applicable: face is not a bigon")
    da, db = f
    x2, x1 = da >> 2, db >> 2
    if x1 == x2:
        raise SiteError("site not applicable: bigon has a repeated crossing")
    if d.is_over(da) != d.is_over(d.theta(da)):
        raise SiteError("site not applicable: no strand is over at both crossings")
    return da, db, x1, x2


def _apply_r2down(d: Diagram, mv: Move) -> tuple:
    da, db, x1, x2 = _bigon_data(d, mv.face)
    if not _region_empty(d, mv.face):
        raise SiteError("site not applicable: bigon is not empty")
    ea, eb = d.dart_edge[da], d.dart_edge[db]
    over_is_a = d.is_over(da)
    w1_ref = d.face_of[opposite(sigma(d.theta(da)))]
    w2_ref = d.face_of[opposite(sigma(d.theta(db)))]
    a_side = dart_side(d, da)
    b_side = dart_side(d, db)
    channel = [(mv.face, w1_ref), (mv.face, w2_ref)]

    w = _Work(d)
    chains, circles = _remove_crossings(w, {x1, x2})
    anchors: dict = {}
    forced: dict = {}
    infos = _circle_records(w, d, circles, extra_unions=channel)

    removed = {x1, x2}
    surv = []
    for ref in (w1_ref, w2_ref):
        surv.extend(y for y in d.face_darts[ref] if (y >> 2) not in removed)
    for orig, side in ((ea, a_side), (eb, b_side)):
        pieces = w.edge_map.get(orig)
        if pieces and pieces[0] in w.etail:
            ne = pieces[0]
            surv.append(w.etail[ne] if side == "R" else w.ehead[ne])
    for ref in {mv.face, w1_ref, w2_ref}:
        anchors[ref] = surv

    core = w.core()
    alive = set(core.dart_edge)
    _force_circle_interiors(d, infos, forced, alive)
    ambient = ("pre", d.nest[d.comp_of[x1]])
    for ref in d.face_darts:
        if ref in forced:
            continue
        cands = anchors.get(ref, d.face_darts[ref])
        if not any(y in alive for y in cands):
            forced[ref] = ambient

    # nest/outer overrides for surviving components trapped inside new loops
    nest_overrides: dict = {}
    outer_overrides: dict = {}
    for k in core.components:
        probe = d.face_of.get(dart(min(core.components[k]), 0))
        inner_of = None
        for info in infos:
            if probe is not None and info["class_of"].get(probe) == info["interior"]:
                if inner_of is None or info["parent"] == inner_of:
                    inner_of = info["lid"]
        if inner_of is None:
            continue
        nest_overrides[k] = loop_place(inner_of)
        pre_outer = d.outer[d.comp_of[x1]]
        chosen = None
        for y in d.face_darts[pre_outer]:
            if y in alive and core.comp_of[y >> 2] == k:
                chosen = core.face_of[y]
                break
        if chosen is None:
            info = next(i for i in infos if i["lid"] == inner_of)
            for ref in d.face_darts:
                if info["class_of"][ref] != info["interior"]:
                    continue
                for y in d.face_darts[ref]:
                    if y in alive and core.comp_of[y >> 2] == k:
                        chosen = core.face_of[y]
                        break
                if chosen is not None:
                    break
        if chosen is None:
            raise SiteError("internal: trapped component has no outer candidate")
        outer_overrides[k] = chosen

    post, remap = _finalize(
        w,
        anchors=anchors,
        forced=forced,
        nest_overrides=nest_overrides,
        outer_overrides=outer_overrides,
    )
    for info in infos:
        place = _loop_container_place(d, info, remap.places)
        if place is None or (place[0] == "face" and place[1] not in post.face_darts):
            raise SiteError("internal: collapsed loop container unresolved")
        rec = post.loops[info["lid"]]
        post = Diagram(
            over=post.over,
            etail=post.etail,
            ehead=post.ehead,
            loops={**post.loops, info["lid"]: FreeLoop(post.region_of_place(place), rec.ccw)},
            outer=post.outer,
            nest=post.nest,
            next_cid=post.next_cid,
            next_eid=post.next_eid,
            next_lid=post.next_lid,
        )

    def strand_entity(orig):
        pieces = w.edge_map.get(orig)
        if pieces and pieces[0] in post.etail:
            return ("e", pieces[0])
        for info in infos:
            if orig in info["edges"]:
                return ("l", info["lid"])
        return None

    remap.info = {
        "removed_crossings": (x1, x2),
        "circles": tuple(i["lid"] for i in infos),
        "a_entity": strand_entity(ea),
        "b_entity": strand_entity(eb),
        "channel": remap.places.get(face_place(mv.face)),
        "bigon_over": "a" if over_is_a else "b",
    }
    return post, remap


# ---------------------------------------------------------------------------
# R3
# ---------------------------------------------------------------------------


def _trigon_data(d: Diagram, ref: int) -> tuple:
    f = d.face_darts.get(ref)
    if f is None or len(f) != 3:
        raise SiteError("site not applicable: face is not a trigon")
    darts = f
    edges = [d.dart_edge[x] for x in darts]
    corners = [d.theta(x) >> 2 for x in darts]
    if len(set(edges)) != 3:
        raise SiteError("site not applicable: trigon sides are not three edges")
    if len(set(corners)) != 3:
        raise SiteError("site not applicable: trigon corners are not three crossings")
    beats = {}
    for i, x in enumerate(darts):
        j = (i + 1) % 3
        beats[(i, j)] = d.is_over(d.theta(x))
        beats[(j, i)] = not beats[(i, j)]
    top = [i for i in range(3) if beats[(i, (i + 1) % 3)] and beats[(i, (i + 2) % 3)]]
    if not top:
        raise SiteError("site not applicable: trigon over/under pattern is cyclic")
    return darts, edges, corners, top[0]


def _apply_r3(d: Diagram, mv: Move) -> tuple:
    darts, edges, corners, top = _trigon_data(d, mv.face)
    if not _region_empty(d, mv.face):
        raise SiteError("site not applicable: trigon is not empty")
    w = _Work(d)
    updates = {}
    ext_edges = []
    for g in edges:
        tg, hg = d.etail[g], d.ehead[g]
        ein = d.dart_edge[opposite(tg)]
        eout = d.dart_edge[opposite(hg)]
        updates[(ein, "h")] = hg
        updates[(g, "t")] = opposite(hg)
        updates[(g, "h")] = opposite(tg)
        updates[(eout, "t")] = tg
        ext_edges.extend([ein, eout])
    for (e, end), nd in updates.items():
        if end == "t":
            w.etail[e] = nd
        else:
            w.ehead[e] = nd

    core = w.core()
    corner_set = set(corners)
    anchors: dict = {}
    for e in set(ext_edges):
        anchors.setdefault(d.face_of[d.ehead[e]], []).append(core.ehead[e])
        anchors.setdefault(d.face_of[d.etail[e]], []).append(core.etail[e])
    across_slid = d.face_of[d.theta(darts[top])]
    anchors[mv.face] = list(anchors.get(across_slid, []))
    for ref in list(anchors):
        anchors[ref] = anchors[ref] + [
            y for y in d.face_darts[ref] if (y >> 2) not in corner_set
        ]

    post, remap = _finalize(w, anchors=anchors)
    y = corners[0]
    side_darts = [
        dart(y, s) for s in range(4) if post.dart_edge[dart(y, s)] in edges
    ]
    p, q = side_darts
    if sigma(p) == q:
        new_ref = post.face_of[q]
    elif sigma(q) == p:
        new_ref = post.face_of[p]
    else:  # pragma: no cover
        raise SiteError("internal: flipped trigon not found")
    remap.info = {"new_trigon": new_ref, "crossings": tuple(corners)}
    return post, remap


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


_APPLY = {
    R1UP: _apply_r1up,
    R1DOWN: _apply_r1down,
    R2UP: _apply_r2up,
    R2DOWN: _apply_r2down,
    R3: _apply_r3,
}


def apply_move(d: Diagram, m: Move) -> tuple:
    """Apply a move; returns (diagram, SiteRemap). Raises SiteError if illegal."""
    require_valid(d)
    if m.kind not in _APPLY:
        raise SiteError(f"site not applicable: unknown kind {m.kind!r}")
    post, remap = _APPLY[m.kind](d, m)
    rep = post.validate()
    if not rep.ok:
        raise SiteError("internal: move produced invalid diagram: " + rep.violations[0])
    if post.crossing_number() - d.crossing_number() != DELTA_C[m.kind]:
        raise SiteError("internal: crossing delta mismatch")
    return post, remap


def _region_occurrences(d: Diagram) -> dict:
    """Region place -> sorted strand occurrences bordering it."""
    occ: dict = {}
    for region, members in d.region_members.items():
        lst = occ.setdefault(region, [])
        for ent in sorted({(d.dart_edge[x], dart_side(d, x)) for x in members}):
            lst.append(("e",) + ent)
    for l, rec in sorted(d.loops.items()):
        occ.setdefault(rec.place, []).append(("l", l, "O"))
        occ.setdefault(loop_place(l), []).append(("l", l, "I"))
    return occ


def _occ_move_fields(which: str, ent: tuple) -> dict:
    if ent[0] == "e":
        return {f"{which}_edge": ent[1], f"{which}_side": ent[2]}
    return {f"{which}_loop": ent[1], f"{which}_side": ent[2]}


def enumerate_sites(d: Diagram, kind: str) -> list:
    """Complete duplicate-free list of legal anchors for `kind` in d."""
    require_valid(d)
    out = []
    if kind == R1UP:
        for e in sorted(d.etail):
            for side in ("L", "R"):
                for sign in ("o", "u"):
                    out.append(Move(R1UP, edge=e, side=side, sign=sign))
        for l in sorted(d.loops):
            for side in ("L", "R"):
                for sign in ("o", "u"):
                    out.append(Move(R1UP, loop=l, side=side, sign=sign))
    elif kind == R1DOWN:
        for ref in sorted(d.face_darts):
            if len(d.face_darts[ref]) != 1:
                continue
            try:
                _kink_data(d, ref)
            except SiteError:
                continue
            if _region_empty(d, ref):
                out.append(Move(R1DOWN, face=ref))
    elif kind == R2UP:
        for region in sorted(_region_occurrences(d)):
            occs = _region_occurrences(d)[region]
            for a in occs:
                for b in occs:
                    if a == b:
                        for coil in ("o", "u"):
                            for hook in ("f", "b"):
                                out.append(
                                    Move(
                                        R2UP,
                                        coil=coil,
                                        hook=hook,
                                        **_occ_move_fields("over", a),
                                        **_occ_move_fields("under", b),
                                    )
                                )
                    else:
                        for fing in ("o", "u"):
                            out.append(
                                Move(
                                    R2UP,
                                    finger=fing,
                                    **_occ_move_fields("over", a),
                                    **_occ_move_fields("under", b),
                                )
                            )
    elif kind == R2DOWN:
        for ref in sorted(d.face_darts):
            if len(d.face_darts[ref]) != 2:
                continue
            try:
                _bigon_data(d, ref)
            except SiteError:
                continue
            if _region_empty(d, ref):
                out.append(Move(R2DOWN, face=ref))
    elif kind == R3:
        for ref in sorted(d.face_darts):
            if len(d.face_darts[ref]) != 3:
                continue
            try:
                _trigon_data(d, ref)
            except SiteError:
                continue
            if _region_empty(d, ref):
                out.append(Move(R3, face=ref))
    else:
        raise SiteError(f"unknown move kind {kind!r}")
    return out


def _entity_occurrences(d: Diagram, ent: tuple, channel: Place) -> list:
    """(entity field dict, side) variants of `ent` facing the channel region."""
    out = []
    if ent is None:
        return out
    if ent[0] == "e":
        e = ent[1]
        if e not in d.etail:
            return out
        for side in ("R", "L"):
            x = d.etail[e] if side == "R" else d.ehead[e]
            if channel is None or d.region_of_dart(x) == channel:
                out.append({"edge": e, "side": side})
        if not out:
            out = [{"edge": e, "side": s} for s in ("R", "L")]
    else:
        l = ent[1]
        if l not in d.loops:
            return out
        for side, reg in (("O", d.loops[l].place), ("I", loop_place(l))):
            if channel is None or reg == channel:
                out.append({"loop": l, "side": side})
        if not out:
            out = [{"loop": l, "side": s} for s in ("O", "I")]
    return out


def invert_move(d_before: Diagram, m: Move, remap: SiteRemap) -> Move:
    """The move undoing m, addressed in the post-move diagram."""
    if m.kind == R1UP:
        return Move(R1DOWN, face=remap.info["monogon"])
    if m.kind == R2UP:
        return Move(R2DOWN, face=remap.info["bigon"])
    if m.kind == R3:
        return Move(R3, face=remap.info["new_trigon"])
    if m.kind == R1DOWN:
        return remap.info["inverse"]
    if m.kind == R2DOWN:
        # re-derive the push that re-creates the bigon; candidate occurrences
        # face the region the bigon merged into, checked by replay
        from .canon import canonical_code

        post, _ = apply_move(d_before, m)
        want = canonical_code(d_before)
        channel = remap.info.get("channel")
        a_occ = _entity_occurrences(post, remap.info.get("a_entity"), channel)
        b_occ = _entity_occurrences(post, remap.info.get("b_entity"), channel)
        over_first = remap.info.get("bigon_over") == "a"
        cands = []
        for ao in a_occ:
            for bo in b_occ:
                over, under = (ao, bo) if over_first else (bo, ao)
                base = dict(
                    over_edge=over.get("edge"),
                    over_loop=over.get("loop"),
                    over_side=over["side"],
                    under_edge=under.get("edge"),
                    under_loop=under.get("loop"),
                    under_side=under["side"],
                )
                if over == under:
                    for coil in ("o", "u"):
                        for hook in ("f", "b"):
                            cands.append(Move(R2UP, coil=coil, hook=hook, **base))
                else:
                    for fing in ("o", "u"):
                        cands.append(Move(R2UP, finger=fing, **base))
        for cand in cands:
            try:
                redo, _ = apply_move(post, cand)
            except SiteError:
                continue
            if canonical_code(redo) == want:
                return cand
        raise SiteError("inconsistent remap: no inverse site reproduces the diagram")
    raise SiteError(f"unknown move kind {m.kind!r}")


class ReplayError(ValueError):
    def __init__(self, index: int, cause: str):
        super().__init__(f"illegal move at index {index}: {cause}")
        self.index = index
        self.cause = cause


def replay_script(d: Diagram, moves, with_codes: bool = True) -> tuple:
    """Apply moves in order; returns (final, list of intermediate codes)."""
    from .canon import canonical_code

    require_valid(d)
    codes = []
    cur = d
    for i, m in enumerate(moves):
        try:
            cur, _ = apply_move(cur, m)
        except (SiteError, ValueError) as exc:
            raise ReplayError(i, str(exc)) from exc
        if with_codes:
            codes.append(canonical_code(cur))
    return cur, codes


def is_ordered(moves) -> bool:
    """True iff kinds appear in blocks R1+, R2+, R3, R2-, R1- (maybe empty)."""
    stage = 0
    for m in moves:
        k = m.kind if isinstance(m, Move) else m
        while stage < len(ORDER_BLOCKS) and ORDER_BLOCKS[stage] != k:
            stage += 1
        if stage >= len(ORDER_BLOCKS):
            return False
    return True
