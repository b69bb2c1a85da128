"""Compact metric forests: finite simplicial metric trees, points, convex
subtrees, directions, and the point-splitting surgery.

Forests are immutable; every operation returns fresh values.  Points have a
canonical representation (vertex form wins over edge-offset form) so that
structural equality is semantic equality.  A convex subtree is stored as its
trace on each edge (a closed subinterval) plus the set of vertices it
contains, which makes intersection and membership one-liners.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

from .scalars import ZERO, Scalar, scalar


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    id: int
    tail: int
    head: int
    length: Scalar

    def other_end(self, v: int) -> int:
        return self.head if v == self.tail else self.tail


@dataclass(frozen=True)
class TreeComponent:
    """One connected component: a finite simplicial metric tree.

    A single vertex with no edges is a legal (point) component.
    """

    id: int
    vertices: tuple[int, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        if not self.vertices:
            raise GeometryError("component needs at least one vertex")
        if len(self.edges) != len(self.vertices) - 1:
            raise GeometryError("component is not a tree (edge/vertex count)")
        for e in self.edges:
            if not (e.length > ZERO):
                raise GeometryError("edge lengths must be positive")
        # connectivity
        seen = {self.vertices[0]}
        frontier = [self.vertices[0]]
        adj = {}
        for e in self.edges:
            adj.setdefault(e.tail, []).append(e.head)
            adj.setdefault(e.head, []).append(e.tail)
        while frontier:
            v = frontier.pop()
            for w in adj.get(v, []):
                if w not in seen:
                    seen.add(w)
                    frontier.append(w)
        if seen != set(self.vertices):
            raise GeometryError("component is not connected")

    @cached_property
    def germs(self) -> dict[int, tuple[tuple[int, int], ...]]:
        """vertex -> germs (edge_id, +1 toward head / -1 toward tail)."""
        out: dict[int, list[tuple[int, int]]] = {v: [] for v in self.vertices}
        for e in self.edges:
            out[e.tail].append((e.id, +1))
            out[e.head].append((e.id, -1))
        return {v: tuple(sorted(g)) for v, g in out.items()}

    @cached_property
    def edge_by_id(self) -> dict[int, Edge]:
        return {e.id: e for e in self.edges}

    def valence(self, v: int) -> int:
        return len(self.germs[v])

    @cached_property
    def total_length(self) -> Scalar:
        t = ZERO
        for e in self.edges:
            t = t + e.length
        return t


@dataclass(frozen=True)
class Point:
    """Canonical point: at a vertex, or strictly inside an edge."""

    component: int
    vertex: int | None = None
    edge: int | None = None
    offset: Scalar | None = None

    def is_vertex(self) -> bool:
        return self.vertex is not None

    def __repr__(self):
        if self.is_vertex():
            return f"Point(c{self.component}, v{self.vertex})"
        return f"Point(c{self.component}, e{self.edge}@{self.offset.serialize()})"


@dataclass(frozen=True)
class Direction:
    """One branch of (component minus base point), named by its edge germ.

    ``toward_head`` is the travel direction along ``edge`` when leaving the
    base point into the branch.
    """

    point: Point
    edge: int
    toward_head: bool

    def sort_key(self):
        return (self.edge, 0 if self.toward_head else 1)


class EmptyIntersection:
    """Falsy marker distinguishing disjoint-in-component from cross-component."""

    __slots__ = ("cross_component",)

    def __init__(self, cross_component: bool):
        self.cross_component = cross_component

    def __bool__(self):
        return False

    def __repr__(self):
        return f"EmptyIntersection(cross_component={self.cross_component})"


@dataclass(frozen=True)
class Subtree:
    """Closed convex subtree: per-edge closed ranges plus contained vertices.

    ``ranges`` holds (edge_id, lo, hi) with 0 <= lo <= hi <= length; lo == hi
    encodes an isolated point strictly inside the edge.  Endpoint touches are
    normalised into ``vertices``.
    """

    component: int
    ranges: tuple[tuple[int, Scalar, Scalar], ...]
    vertices: frozenset[int]

    def is_empty(self) -> bool:
        return not self.ranges and not self.vertices

    def is_single_point(self) -> bool:
        if len(self.vertices) == 1 and not self.ranges:
            return True
        return (
            not self.vertices
            and len(self.ranges) == 1
            and self.ranges[0][1] == self.ranges[0][2]
        )

    @property
    def range_by_edge(self) -> dict[int, tuple[Scalar, Scalar]]:
        return {eid: (lo, hi) for eid, lo, hi in self.ranges}

    def total_length(self) -> Scalar:
        t = ZERO
        for _, lo, hi in self.ranges:
            t = t + (hi - lo)
        return t

    def sort_key(self):
        return (
            self.component,
            tuple((eid, lo.serialize(), hi.serialize()) for eid, lo, hi in self.ranges),
            tuple(sorted(self.vertices)),
        )

    def __repr__(self):
        bits = [f"v{v}" for v in sorted(self.vertices)]
        bits += [f"e{eid}[{lo.serialize()},{hi.serialize()}]" for eid, lo, hi in self.ranges]
        return f"Subtree(c{self.component}: {', '.join(bits)})"


class MetricForest:
    """Disjoint union of finitely many finite simplicial metric trees."""

    def __init__(self, components: tuple[TreeComponent, ...]):
        self.components = tuple(sorted(components, key=lambda c: c.id))
        self._by_id = {c.id: c for c in self.components}
        if len(self._by_id) != len(self.components):
            raise GeometryError("duplicate component ids")
        self.vertex_component: dict[int, int] = {}
        self.edge_component: dict[int, int] = {}
        for c in self.components:
            for v in c.vertices:
                if v in self.vertex_component:
                    raise GeometryError("duplicate vertex id across components")
                self.vertex_component[v] = c.id
            for e in c.edges:
                if e.id in self.edge_component:
                    raise GeometryError("duplicate edge id across components")
                self.edge_component[e.id] = c.id
        self._dist_cache: dict[tuple[int, int], dict[int, Scalar]] = {}

    # -- basic lookups -----------------------------------------------------

    def component(self, cid: int) -> TreeComponent:
        return self._by_id[cid]

    def edge(self, eid: int) -> Edge:
        return self.component(self.edge_component[eid]).edge_by_id[eid]

    @property
    def component_ids(self) -> list[int]:
        return [c.id for c in self.components]

    def max_ids(self) -> tuple[int, int, int]:
        mv = max((v for c in self.components for v in c.vertices), default=-1)
        me = max((e.id for c in self.components for e in c.edges), default=-1)
        mc = max(self._by_id, default=-1)
        return mv, me, mc

    # -- points ------------------------------------------------------------

    def vertex_point(self, vid: int) -> Point:
        return Point(self.vertex_component[vid], vertex=vid)

    def edge_point(self, eid: int, offset) -> Point:
        off = scalar(offset)
        e = self.edge(eid)
        if off < ZERO or off > e.length:
            raise GeometryError("offset outside edge")
        if off == ZERO:
            return self.vertex_point(e.tail)
        if off == e.length:
            return self.vertex_point(e.head)
        return Point(self.edge_component[eid], edge=eid, offset=off)

    def point_key(self, p: Point):
        """Deterministic total order on points of one forest."""
        if p.is_vertex():
            return (p.component, 0, p.vertex, ZERO)
        return (p.component, 1, p.edge, p.offset)

    def offset_on_edge(self, p: Point, eid: int) -> Scalar | None:
        """Position of p along edge eid, or None if p is not on that edge."""
        e = self.edge(eid)
        if p.is_vertex():
            if p.vertex == e.tail:
                return ZERO
            if p.vertex == e.head:
                return e.length
            return None
        return p.offset if p.edge == eid else None

    # -- distances and arcs --------------------------------------------------

    def _vertex_dists(self, cid: int, source: int) -> dict[int, Scalar]:
        key = (cid, source)
        cached = self._dist_cache.get(key)
        if cached is not None:
            return cached
        comp = self.component(cid)
        dist = {source: ZERO}
        frontier = [source]
        while frontier:
            v = frontier.pop()
            for eid, sgn in comp.germs[v]:
                e = comp.edge_by_id[eid]
                w = e.head if sgn > 0 else e.tail
                if w not in dist:
                    dist[w] = dist[v] + e.length
                    frontier.append(w)
        self._dist_cache[key] = dist
        return dist

    def distance(self, p: Point, q: Point) -> Scalar:
        if p.component != q.component:
            raise GeometryError("points in different components")
        cid = p.component
        if not p.is_vertex() and not q.is_vertex() and p.edge == q.edge:
            return abs(p.offset - q.offset)
        if p.is_vertex() and q.is_vertex():
            return self._vertex_dists(cid, p.vertex)[q.vertex]

        def end_options(x: Point):
            if x.is_vertex():
                return [(x.vertex, ZERO)]
            e = self.edge(x.edge)
            return [(e.tail, x.offset), (e.head, e.length - x.offset)]

        best = None
        for (u, du) in end_options(p):
            dv = self._vertex_dists(cid, u)
            for (w, dw) in end_options(q):
                cand = du + dv[w] + dw
                if best is None or cand < best:
                    best = cand
        return best

    def vertex_path(self, u: int, v: int) -> list[tuple[int, int]]:
        """Germ path from vertex u to vertex v: list of (edge_id, sign)."""
        cid = self.vertex_component[u]
        comp = self.component(cid)
        prev: dict[int, tuple[int, int, int]] = {u: None}
        frontier = [u]
        while frontier:
            w = frontier.pop()
            if w == v:
                break
            for eid, sgn in comp.germs[w]:
                e = comp.edge_by_id[eid]
                nxt = e.head if sgn > 0 else e.tail
                if nxt not in prev:
                    prev[nxt] = (w, eid, sgn)
                    frontier.append(nxt)
        path = []
        w = v
        while prev[w] is not None:
            pw, eid, sgn = prev[w]
            path.append((eid, sgn))
            w = pw
        path.reverse()
        return path

    def arc_cells(self, p: Point, q: Point):
        """Arc [p, q] as (vertices, ranges) where ranges are (eid, lo, hi)."""
        if p.component != q.component:
            raise GeometryError("points in different components")
        if p == q:
            if p.is_vertex():
                return {p.vertex}, []
            return set(), [(p.edge, p.offset, p.offset)]
        if not p.is_vertex() and not q.is_vertex() and p.edge == q.edge:
            lo, hi = sorted((p.offset, q.offset))
            return set(), [(p.edge, lo, hi)]

        # choose exit vertex of p / entry vertex of q, by total distance
        def ends(x: Point):
            if x.is_vertex():
                return [(x.vertex, ZERO, None)]
            e = self.edge(x.edge)
            return [
                (e.tail, x.offset, (x.edge, ZERO, x.offset)),
                (e.head, e.length - x.offset, (x.edge, x.offset, e.length)),
            ]

        total = self.distance(p, q)
        for (u, du, pre) in ends(p):
            dv = self._vertex_dists(p.component, u)
            for (w, dw, post) in ends(q):
                if du + dv[w] + dw == total:
                    verts = {u, w}
                    ranges = []
                    if pre is not None:
                        lo, hi = sorted(pre[1:])
                        ranges.append((pre[0], lo, hi))
                    for eid, sgn in self.vertex_path(u, w):
                        e = self.edge(eid)
                        verts.add(e.tail)
                        verts.add(e.head)
                        ranges.append((eid, ZERO, e.length))
                    if post is not None:
                        lo, hi = sorted(post[1:])
                        ranges.append((post[0], lo, hi))
                    return verts, ranges
        raise AssertionError("unreachable: arc endpoints found no geodesic")

    def point_along_arc(self, a: Point, b: Point, dist: Scalar) -> Point:
        """Point on [a, b] at the given distance from a."""
        if dist == ZERO:
            return a
        total = self.distance(a, b)
        if dist == total:
            return b
        if dist < ZERO or dist > total:
            raise GeometryError("distance outside arc")
        _, ranges = self.arc_cells(a, b)
        # order ranges as travelled from a
        remaining = dist
        cur = a
        ordered = self._order_ranges_from(a, b, ranges)
        for eid, lo, hi, forward in ordered:
            seg = hi - lo
            if remaining <= seg:
                off = (lo + remaining) if forward else (hi - remaining)
                return self.edge_point(eid, off)
            remaining = remaining - seg
        raise AssertionError("unreachable: ran out of arc")

    def _order_ranges_from(self, a: Point, b: Point, ranges):
        """Ranges of arc [a,b] in travel order with orientation flags."""
        items = []
        for eid, lo, hi in ranges:
            if lo == hi:
                continue
            plo = self.edge_point(eid, lo)
            phi = self.edge_point(eid, hi)
            dlo = self.distance(a, plo)
            dhi = self.distance(a, phi)
            forward = dlo < dhi
            items.append((dlo if forward else dhi, eid, lo, hi, forward))
        items.sort(key=lambda t: t[0])
        return [(eid, lo, hi, fwd) for _, eid, lo, hi, fwd in items]

    # -- subtrees ------------------------------------------------------------

    def _normalize_subtree(self, cid: int, raw_ranges, raw_vertices) -> Subtree:
        by_edge: dict[int, tuple[Scalar, Scalar]] = {}
        verts = set(raw_vertices)
        for eid, lo, hi in raw_ranges:
            if eid in by_edge:
                olo, ohi = by_edge[eid]
                by_edge[eid] = (min(olo, lo), max(ohi, hi))
            else:
                by_edge[eid] = (lo, hi)
        ranges = []
        for eid in sorted(by_edge):
            lo, hi = by_edge[eid]
            e = self.edge(eid)
            if lo == ZERO:
                verts.add(e.tail)
            if hi == e.length:
                verts.add(e.head)
            degenerate = lo == hi
            boundary = lo == ZERO or hi == e.length
            if degenerate and boundary:
                continue  # endpoint point, already recorded as a vertex
            ranges.append((eid, lo, hi))
        return Subtree(cid, tuple(ranges), frozenset(verts))

    def point_subtree(self, p: Point) -> Subtree:
        if p.is_vertex():
            return Subtree(p.component, (), frozenset({p.vertex}))
        return Subtree(p.component, ((p.edge, p.offset, p.offset),), frozenset())

    def full_subtree(self, cid: int) -> Subtree:
        comp = self.component(cid)
        return self._normalize_subtree(
            cid, [(e.id, ZERO, e.length) for e in comp.edges], set(comp.vertices)
        )

    def convex_hull(self, points) -> Subtree:
        points = list(points)
        if not points:
            raise GeometryError("hull of empty point set")
        cid = points[0].component
        if any(p.component != cid for p in points):
            raise GeometryError("points span multiple components")
        base = points[0]
        verts: set[int] = set()
        ranges: list[tuple[int, Scalar, Scalar]] = []
        if base.is_vertex():
            verts.add(base.vertex)
        else:
            ranges.append((base.edge, base.offset, base.offset))
        for p in points[1:]:
            vs, rs = self.arc_cells(base, p)
            verts |= vs
            ranges += rs
        return self._normalize_subtree(cid, ranges, verts)

    def subtree_contains(self, K: Subtree, p: Point) -> bool:
        if p.component != K.component:
            return False
        if p.is_vertex():
            return p.vertex in K.vertices
        rng = K.range_by_edge.get(p.edge)
        return rng is not None and rng[0] <= p.offset <= rng[1]

    def subtree_extremal_points(self, K: Subtree) -> list[Point]:
        """Leaves of K (points with at most one K-direction), canonical order."""
        candidates: list[Point] = [self.vertex_point(v) for v in sorted(K.vertices)]
        for eid, lo, hi in K.ranges:
            candidates.append(self.edge_point(eid, lo))
            candidates.append(self.edge_point(eid, hi))
        seen = set()
        out = []
        for p in candidates:
            if p in seen:
                continue
            seen.add(p)
            if self._subtree_germ_count(K, p) <= 1:
                out.append(p)
        out.sort(key=self.point_key)
        return out

    def _subtree_germ_count(self, K: Subtree, p: Point) -> int:
        count = 0
        if p.is_vertex():
            comp = self.component(p.component)
            for eid, sgn in comp.germs[p.vertex]:
                rng = K.range_by_edge.get(eid)
                e = comp.edge_by_id[eid]
                if rng is None:
                    continue
                lo, hi = rng
                if lo == hi:
                    continue
                if sgn > 0 and lo == ZERO:
                    count += 1
                elif sgn < 0 and hi == e.length:
                    count += 1
        else:
            rng = K.range_by_edge.get(p.edge)
            if rng is not None:
                lo, hi = rng
                if lo <= p.offset <= hi:
                    if p.offset > lo:
                        count += 1
                    if p.offset < hi:
                        count += 1
        return count

    def subtree_diameter(self, K: Subtree) -> Scalar:
        ext = self.subtree_extremal_points(K)
        best = ZERO
        for i in range(len(ext)):
            for j in range(i + 1, len(ext)):
                d = self.distance(ext[i], ext[j])
                if d > best:
                    best = d
        return best

    def subtree_directions_at(self, K: Subtree, p: Point) -> list[Direction]:
        """Directions at p that K enters (germ-level)."""
        out = []
        for d in self.directions_at(p):
            if self._subtree_enters(K, p, d):
                out.append(d)
        return out

    def _subtree_enters(self, K: Subtree, p: Point, d: Direction) -> bool:
        rng = K.range_by_edge.get(d.edge)
        e = self.edge(d.edge)
        off = self.offset_on_edge(p, d.edge)
        if rng is None or off is None:
            return False
        lo, hi = rng
        if d.toward_head:
            return lo <= off < hi
        return lo < off <= hi

    # -- directions ----------------------------------------------------------

    def directions_at(self, p: Point) -> list[Direction]:
        comp = self.component(p.component)
        if p.is_vertex():
            out = []
            for eid, sgn in comp.germs[p.vertex]:
                out.append(Direction(p, eid, sgn > 0))
            return sorted(out, key=Direction.sort_key)
        return [Direction(p, p.edge, False), Direction(p, p.edge, True)]

    def is_interior(self, p: Point) -> bool:
        """p lies in the interior of a segment of its component."""
        return len(self.directions_at(p)) >= 2

    # -- splitting surgery -----------------------------------------------------

    def split_component(self, x: Point, left, right):
        """Split the component of x at x into closures of the two direction
        sets.  Returns (forest, x_left, x_right, SplitTransfer)."""
        dirs = set(self.directions_at(x))
        left = frozenset(left)
        right = frozenset(right)
        if not left or not right or (left | right) != dirs or (left & right):
            raise GeometryError("left/right is not a nontrivial partition of directions")
        if not self.is_interior(x):
            raise GeometryError("split point must be interior to its component")

        cid = x.component
        comp = self.component(cid)
        max_v, max_e, max_c = self.max_ids()
        xl_vertex, xr_vertex = max_v + 1, max_v + 2
        next_edge = max_e + 1
        left_cid, right_cid = max_c + 1, max_c + 2

        # side assignment of all vertices/edge-pieces of comp
        side_of_vertex: dict[int, str] = {}
        split_edges: dict[int, dict] = {}

        def germ_side(d: Direction) -> str:
            return "L" if d in left else "R"

        if x.is_vertex():
            for d in self.directions_at(x):
                e = comp.edge_by_id[d.edge]
                start = e.head if d.toward_head else e.tail
                s = germ_side(d)
                stack = [start]
                while stack:
                    v = stack.pop()
                    if v in side_of_vertex or v == x.vertex:
                        continue
                    side_of_vertex[v] = s
                    for eid, sgn in comp.germs[v]:
                        e2 = comp.edge_by_id[eid]
                        w = e2.head if sgn > 0 else e2.tail
                        if w != x.vertex:
                            stack.append(w)
        else:
            e = comp.edge_by_id[x.edge]
            tail_side = germ_side(Direction(x, x.edge, False))
            head_side = germ_side(Direction(x, x.edge, True))
            split_edges[x.edge] = {
                "at": x.offset,
                "tail_side": tail_side,
                "head_side": head_side,
                "tail_new_edge": next_edge,
                "head_new_edge": next_edge + 1,
            }
            next_edge += 2
            for start, s in ((e.tail, tail_side), (e.head, head_side)):
                stack = [start]
                while stack:
                    v = stack.pop()
                    if v in side_of_vertex:
                        continue
                    side_of_vertex[v] = s
                    for eid, sgn in comp.germs[v]:
                        if eid == x.edge:
                            continue
                        e2 = comp.edge_by_id[eid]
                        stack.append(e2.head if sgn > 0 else e2.tail)

        new_components = [c for c in self.components if c.id != cid]
        side_data = {}
        for s, new_cid, x_vertex in (("L", left_cid, xl_vertex), ("R", right_cid, xr_vertex)):
            verts = [v for v in comp.vertices if side_of_vertex.get(v) == s]
            verts.append(x_vertex)
            edges = []
            for e in comp.edges:
                info = split_edges.get(e.id)
                if info is None:
                    anchor = e.tail if (x.is_vertex() and e.tail == x.vertex) else None
                    if x.is_vertex() and e.tail == x.vertex:
                        on = germ_side(Direction(x, e.id, True))
                        if on == s:
                            edges.append(Edge(e.id, x_vertex, e.head, e.length))
                        continue
                    if x.is_vertex() and e.head == x.vertex:
                        on = germ_side(Direction(x, e.id, False))
                        if on == s:
                            edges.append(Edge(e.id, e.tail, x_vertex, e.length))
                        continue
                    if side_of_vertex.get(e.tail) == s:
                        edges.append(e)
                else:
                    if info["tail_side"] == s:
                        edges.append(Edge(info["tail_new_edge"], e.tail, x_vertex, info["at"]))
                    if info["head_side"] == s:
                        edges.append(
                            Edge(info["head_new_edge"], x_vertex, e.head, e.length - info["at"])
                        )
            new_components.append(TreeComponent(new_cid, tuple(verts), tuple(edges)))
            side_data[s] = (new_cid, x_vertex)

        forest = MetricForest(tuple(new_components))
        transfer = SplitTransfer(self, forest, x, cid, side_of_vertex, split_edges, side_data, left)
        xl = forest.vertex_point(side_data["L"][1])
        xr = forest.vertex_point(side_data["R"][1])
        return forest, xl, xr, transfer


class SplitTransfer:
    """Coordinate transfer from a forest to its split successor."""

    def __init__(self, old, new, x, split_cid, side_of_vertex, split_edges, side_data, left_dirs):
        self.old = old
        self.new = new
        self.x = x
        self.split_cid = split_cid
        self.side_of_vertex = side_of_vertex
        self.split_edges = split_edges
        self.side_data = side_data
        self.left_dirs = left_dirs

    def side_of_point(self, p: Point) -> str | None:
        """'L'/'R' for points of the split component (None for x itself)."""
        if p.component != self.split_cid:
            return None
        if p == self.x:
            return None
        if p.is_vertex():
            return self.side_of_vertex[p.vertex]
        info = self.split_edges.get(p.edge)
        if info is None:
            e = self.old.edge(p.edge)
            return self.side_of_vertex[e.tail]
        return info["tail_side"] if p.offset < info["at"] else info["head_side"]

    def point(self, p: Point, x_side: str | None = None) -> Point:
        """Transfer a point; x needs an explicit side."""
        if p.component != self.split_cid:
            return p
        if p == self.x:
            if x_side not in ("L", "R"):
                raise GeometryError("transferring the split point needs a side")
            return self.new.vertex_point(self.side_data[x_side][1])
        if p.is_vertex():
            return self.new.vertex_point(p.vertex)
        info = self.split_edges.get(p.edge)
        if info is None:
            return self.new.edge_point(p.edge, p.offset)
        if p.offset < info["at"]:
            return self.new.edge_point(info["tail_new_edge"], p.offset)
        return self.new.edge_point(info["head_new_edge"], p.offset - info["at"])

    def side_subtree(self, side: str) -> Subtree:
        """Closure of one side, in OLD coordinates."""
        comp = self.old.component(self.split_cid)
        verts = {v for v, s in self.side_of_vertex.items() if s == side}
        ranges = []
        for e in comp.edges:
            info = self.split_edges.get(e.id)
            if info is None:
                tail_anchor = e.tail
                if self.x.is_vertex() and e.tail == self.x.vertex:
                    d = Direction(self.x, e.id, True)
                    if ("L" if d in self.left_dirs else "R") == side:
                        ranges.append((e.id, ZERO, e.length))
                    continue
                if self.x.is_vertex() and e.head == self.x.vertex:
                    d = Direction(self.x, e.id, False)
                    if ("L" if d in self.left_dirs else "R") == side:
                        ranges.append((e.id, ZERO, e.length))
                    continue
                if self.side_of_vertex.get(tail_anchor) == side:
                    ranges.append((e.id, ZERO, e.length))
            else:
                if info["tail_side"] == side:
                    ranges.append((e.id, ZERO, info["at"]))
                if info["head_side"] == side:
                    ranges.append((e.id, info["at"], e.length))
        raw_vertices = set(verts)
        if self.x.is_vertex():
            raw_vertices.add(self.x.vertex)
        return self.old._normalize_subtree(self.split_cid, ranges, raw_vertices)

    def subtree(self, K: Subtree, x_side: str | None = None) -> Subtree:
        """Clip K to one side (when it touches x) and transfer coordinates.

        For subtrees not meeting x the side is inferred.
        """
        if K.component != self.split_cid:
            return K
        touches_x = self.old.subtree_contains(K, self.x)
        if touches_x:
            if x_side is None:
                germs = self.old.subtree_directions_at(K, self.x)
                sides = {("L" if g in self.left_dirs else "R") for g in germs}
                if len(sides) != 1:
                    raise GeometryError("subtree straddles the split point; side is ambiguous")
                x_side = sides.pop()
            K = intersect_subtrees(self.old, K, self.side_subtree(x_side))
            if not isinstance(K, Subtree):
                raise AssertionError("clipped subtree vanished")
        else:
            some = self._some_point(K)
            x_side = self.side_of_point(some)
        new_cid = self.side_data[x_side][0]
        verts = set()
        ranges = []
        for v in K.vertices:
            if self.x.is_vertex() and v == self.x.vertex:
                verts.add(self.side_data[x_side][1])
            else:
                verts.add(v)
        for eid, lo, hi in K.ranges:
            info = self.split_edges.get(eid)
            if info is None:
                ranges.append((eid, lo, hi))
            else:
                at = info["at"]
                if hi <= at and info["tail_side"] == x_side:
                    ranges.append((info["tail_new_edge"], lo, hi))
                elif lo >= at and info["head_side"] == x_side:
                    ranges.append((info["head_new_edge"], lo - at, hi - at))
                else:
                    # clipped range crossing removed: split at x was clipped above
                    if lo < at and info["tail_side"] == x_side:
                        ranges.append((info["tail_new_edge"], lo, min(hi, at)))
                    if hi > at and info["head_side"] == x_side:
                        ranges.append((info["head_new_edge"], max(lo, at) - at, hi - at))
        return self.new._normalize_subtree(new_cid, ranges, verts)

    def _some_point(self, K: Subtree) -> Point:
        if K.vertices:
            return self.old.vertex_point(min(K.vertices))
        eid, lo, hi = K.ranges[0]
        return self.old.edge_point(eid, lo) if lo > ZERO else self.old.edge_point(eid, hi)


def intersect_subtrees(forest: MetricForest, K1: Subtree, K2: Subtree):
    """Exact intersection; EmptyIntersection marks empty (flagging the
    cross-component case)."""
    if K1.component != K2.component:
        return EmptyIntersection(cross_component=True)
    verts = set(K1.vertices & K2.vertices)
    ranges = []
    r2 = K2.range_by_edge
    for eid, lo1, hi1 in K1.ranges:
        if eid not in r2:
            continue
        lo2, hi2 = r2[eid]
        lo, hi = max(lo1, lo2), min(hi1, hi2)
        if lo <= hi:
            ranges.append((eid, lo, hi))
    if not verts and not ranges:
        return EmptyIntersection(cross_component=False)
    return forest._normalize_subtree(K1.component, ranges, verts)


def subtree_union_components(forest: MetricForest, parts: list[Subtree]) -> list[Subtree]:
    """Connected components of a finite union of subtrees of one forest."""
    n = len(parts)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        parent[find(i)] = find(j)

    for i in range(n):
        for j in range(i + 1, n):
            if parts[i].component != parts[j].component:
                continue
            if intersect_subtrees(forest, parts[i], parts[j]):
                union(i, j)
    groups: dict[int, list[Subtree]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(parts[i])
    out = []
    for members in groups.values():
        verts = set()
        ranges = []
        for K in members:
            verts |= set(K.vertices)
            ranges += list(K.ranges)
        out.append(forest._normalize_subtree(members[0].component, ranges, verts))
    out.sort(key=lambda K: K.sort_key())
    return out
