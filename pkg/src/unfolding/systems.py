"""Systems of isometries on compact forests.

A system is a forest together with finitely many partial isometries between
compact subtrees.  Letters are stored unsigned; a signed letter (letter, +1)
acts domain -> image and (letter, -1) is its inverse.  Words act left to
right: w = w1 w2 ... wk applies w1 first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from .forest import (
    Direction,
    EmptyIntersection,
    GeometryError,
    MetricForest,
    Point,
    Subtree,
    intersect_subtrees,
)
from .scalars import ZERO, Scalar


class InvalidSystemError(ValueError):
    pass


SignedLetter = tuple[str, int]


def inverse_word(word: tuple[SignedLetter, ...]) -> tuple[SignedLetter, ...]:
    return tuple((l, -s) for l, s in reversed(word))


def is_reduced_word(word) -> bool:
    return all(
        not (word[i][0] == word[i + 1][0] and word[i][1] == -word[i + 1][1])
        for i in range(len(word) - 1)
    )


def free_reduce(word):
    out = []
    for l, s in word:
        if out and out[-1][0] == l and out[-1][1] == -s:
            out.pop()
        else:
            out.append((l, s))
    return tuple(out)


def word_to_str(word) -> str:
    """Single-char letter ids only: lowercase forward, uppercase inverse."""
    bits = []
    for l, s in word:
        if len(l) != 1 or not l.islower():
            raise ValueError("compact word syntax needs single-char lowercase letter ids")
        bits.append(l if s > 0 else l.upper())
    return "".join(bits)


def word_from_str(text: str) -> tuple[SignedLetter, ...]:
    word = []
    for ch in text:
        if ch.islower():
            word.append((ch, 1))
        elif ch.isupper():
            word.append((ch.lower(), -1))
        else:
            raise ValueError(f"bad letter {ch!r} in word")
    return tuple(word)


@dataclass(frozen=True)
class PartialIsometry:
    """Bijective isometry between two compact subtrees, given by anchors.

    Anchors pair the extremal points of the domain with their images; every
    interior point is determined by its distances to two anchors.
    """

    letter: str
    domain: Subtree
    image: Subtree
    anchors: tuple[tuple[Point, Point], ...]


@dataclass(frozen=True)
class SystemGraph:
    """Components as vertices, letters as edges (domain comp -> image comp)."""

    vertices: tuple[int, ...]
    edges: tuple[tuple[str, int, int], ...]

    @cached_property
    def valences(self) -> dict[int, int]:
        val = {v: 0 for v in self.vertices}
        for _, t, h in self.edges:
            val[t] += 1
            val[h] += 1
        return val

    @property
    def rank(self) -> int:
        return len(self.edges) - len(self.vertices) + 1

    @property
    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edges)

    def is_connected(self) -> bool:
        if not self.vertices:
            return False
        adj: dict[int, set[int]] = {v: set() for v in self.vertices}
        for _, t, h in self.edges:
            adj[t].add(h)
            adj[h].add(t)
        seen = {self.vertices[0]}
        stack = [self.vertices[0]]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(self.vertices)

    def branch_points(self) -> list[int]:
        return [v for v in self.vertices if self.valences[v] >= 3]


@dataclass(frozen=True)
class AdmissibleWord:
    word: tuple[SignedLetter, ...]
    domain: Subtree


@dataclass
class ReducednessReport:
    depth: int
    graph_connected: bool
    extremal_points_doubly_covered: bool
    independent_generators_up_to_depth: bool
    every_point_has_infinite_path_up_to_depth: bool
    max_domain_diameter_at_depth: Scalar
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            self.graph_connected
            and self.extremal_points_doubly_covered
            and self.independent_generators_up_to_depth
            and self.every_point_has_infinite_path_up_to_depth
        )


@dataclass(frozen=True)
class Cell:
    """One overlay cell: a vertex, an isolated interior point, or an open
    interval between consecutive singular points of an edge."""

    component: int
    kind: str  # "vertex" | "point" | "interval"
    vertex: int | None = None
    edge: int | None = None
    lo: Scalar | None = None
    hi: Scalar | None = None


class SystemOfIsometries:
    """Forest plus a finite alphabet of partial isometries."""

    def __init__(self, forest: MetricForest, letters: tuple[PartialIsometry, ...]):
        self.forest = forest
        self.letters = tuple(sorted(letters, key=lambda l: l.letter))
        self.by_letter = {l.letter: l for l in self.letters}
        if len(self.by_letter) != len(self.letters):
            raise InvalidSystemError("duplicate letter ids")

    # -- validation ----------------------------------------------------------

    def validate(self, require_connected: bool = True) -> None:
        if not self.letters:
            raise InvalidSystemError("empty alphabet: graph degenerate")
        F = self.forest
        for pi in self.letters:
            if not pi.anchors:
                raise InvalidSystemError(f"letter {pi.letter}: no anchors")
            srcs = [a for a, _ in pi.anchors]
            dsts = [b for _, b in pi.anchors]
            for i in range(len(pi.anchors)):
                for j in range(i + 1, len(pi.anchors)):
                    d1 = F.distance(srcs[i], srcs[j])
                    d2 = F.distance(dsts[i], dsts[j])
                    if d1 != d2:
                        raise InvalidSystemError(
                            f"letter {pi.letter}: anchor map is not distance-preserving"
                        )
            if F.convex_hull(srcs) != pi.domain:
                raise InvalidSystemError(f"letter {pi.letter}: anchors do not span the domain")
            if F.convex_hull(dsts) != pi.image:
                raise InvalidSystemError(f"letter {pi.letter}: anchor images do not span the image")
            ext = F.subtree_extremal_points(pi.domain)
            if not set(ext) <= set(srcs):
                raise InvalidSystemError(
                    f"letter {pi.letter}: anchors miss an extremal point of the domain"
                )
        if require_connected and not self.system_graph(check_connected=False).is_connected():
            raise InvalidSystemError("graph of the system is disconnected")

    # -- signed letters --------------------------------------------------------

    def signed_domain(self, sl: SignedLetter) -> Subtree:
        pi = self.by_letter[sl[0]]
        return pi.domain if sl[1] > 0 else pi.image

    def signed_image(self, sl: SignedLetter) -> Subtree:
        pi = self.by_letter[sl[0]]
        return pi.image if sl[1] > 0 else pi.domain

    @property
    def signed_letters(self) -> list[SignedLetter]:
        out = []
        for pi in self.letters:
            out.append((pi.letter, 1))
            out.append((pi.letter, -1))
        return out

    # -- evaluation ------------------------------------------------------------

    def apply(self, sl: SignedLetter, p: Point) -> Point:
        """Image of p under the signed letter; p must lie in its domain."""
        pi = self.by_letter[sl[0]]
        anchors = pi.anchors if sl[1] > 0 else tuple((b, a) for a, b in pi.anchors)
        dom = self.signed_domain(sl)
        F = self.forest
        if not F.subtree_contains(dom, p):
            raise GeometryError(f"point outside domain of {sl}")
        if len(anchors) == 1:
            return anchors[0][1]
        for i in range(len(anchors)):
            si, ti = anchors[i]
            if p == si:
                return ti
            for j in range(len(anchors)):
                if i == j:
                    continue
                sj, tj = anchors[j]
                dip = F.distance(si, p)
                if dip + F.distance(p, sj) == F.distance(si, sj):
                    return F.point_along_arc(ti, tj, dip)
        raise AssertionError("anchored point not on any anchor arc")

    def apply_word(self, word, p: Point) -> Point:
        for sl in word:
            p = self.apply(sl, p)
        return p

    def map_subtree(self, sl: SignedLetter, K: Subtree) -> Subtree:
        """Image of a subtree K contained in the domain of the signed letter."""
        F = self.forest
        ext = F.subtree_extremal_points(K)
        return F.convex_hull([self.apply(sl, p) for p in ext])

    # -- words -------------------------------------------------------------------

    def domain_of_word(self, word) -> Subtree | None:
        """Domain of the composed partial map (empty -> None)."""
        word = tuple(word)
        if not is_reduced_word(word):
            raise ValueError("word is not reduced")
        if not word:
            raise ValueError("the empty word has the whole forest as domain")
        D = self.signed_domain(word[-1])
        for sl in reversed(word[:-1]):
            img = self.signed_image(sl)
            hit = intersect_subtrees(self.forest, img, D)
            if not isinstance(hit, Subtree):
                return None
            D = self.map_subtree((sl[0], -sl[1]), hit)
        return D

    def image_of_word(self, word) -> Subtree | None:
        D = self.domain_of_word(word)
        if D is None:
            return None
        K = D
        for sl in word:
            K = self.map_subtree(sl, K)
        return K

    def admissible_words(self, length: int) -> list[AdmissibleWord]:
        """All reduced words of exactly the given length with nonempty domain,
        in lexicographic order (letter id, then sign + before -)."""
        if length < 0:
            raise ValueError("length must be >= 0")
        F = self.forest

        def letter_key(sl):
            return (sl[0], 0 if sl[1] > 0 else 1)

        alphabet = sorted(self.signed_letters, key=letter_key)
        out: list[AdmissibleWord] = []
        if length == 0:
            return out

        def extend(word, image):
            # image: image subtree of the composed word so far (None at root)
            if len(word) == length:
                dom = self.domain_of_word(word)
                out.append(AdmissibleWord(tuple(word), dom))
                return
            for sl in alphabet:
                if word and word[-1][0] == sl[0] and word[-1][1] == -sl[1]:
                    continue
                dom_sl = self.signed_domain(sl)
                if image is None:
                    nxt = dom_sl
                else:
                    hit = intersect_subtrees(F, image, dom_sl)
                    if not isinstance(hit, Subtree):
                        continue
                    nxt = self.map_subtree(sl, hit)
                word.append(sl)
                extend(word, nxt)
                word.pop()

        extend([], None)
        return out

    # -- graph ---------------------------------------------------------------

    def system_graph(self, check_connected: bool = True) -> SystemGraph:
        edges = tuple(
            (pi.letter, pi.domain.component, pi.image.component) for pi in self.letters
        )
        g = SystemGraph(tuple(self.forest.component_ids), edges)
        if check_connected and not g.is_connected():
            raise InvalidSystemError("graph of the system is disconnected")
        return g

    # -- overlay / coverage ------------------------------------------------------

    def coverage_cells(self, subtrees: list[Subtree] | None = None) -> list[tuple[Cell, int]]:
        """Cells cut by the singular points of the given subtrees (default:
        all signed domains) and how many of them cover each cell."""
        F = self.forest
        if subtrees is None:
            subtrees = [self.signed_domain(sl) for sl in self.signed_letters]
        cells: list[tuple[Cell, int]] = []

        def covers_point(p: Point) -> int:
            return sum(1 for K in subtrees if K.component == p.component and F.subtree_contains(K, p))

        for comp in F.components:
            local = [K for K in subtrees if K.component == comp.id]
            for v in comp.vertices:
                p = F.vertex_point(v)
                cells.append((Cell(comp.id, "vertex", vertex=v), covers_point(p)))
            for e in comp.edges:
                cuts = {ZERO, e.length}
                for K in local:
                    rng = K.range_by_edge.get(e.id)
                    if rng:
                        cuts.add(rng[0])
                        cuts.add(rng[1])
                offs = sorted(cuts)
                for o in offs[1:-1]:
                    p = F.edge_point(e.id, o)
                    cells.append(
                        (Cell(comp.id, "point", edge=e.id, lo=o, hi=o), covers_point(p))
                    )
                for lo, hi in zip(offs, offs[1:]):
                    count = 0
                    for K in local:
                        rng = K.range_by_edge.get(e.id)
                        if rng and rng[0] <= lo and hi <= rng[1]:
                            count += 1
                    cells.append((Cell(comp.id, "interval", edge=e.id, lo=lo, hi=hi), count))
        return cells

    def is_surface_type(self):
        """True iff every point lies in at least two signed domains; on False
        also returns a maximal under-covered witness run."""
        cells = self.coverage_cells()
        bad = [(c, n) for c, n in cells if n <= 1]
        if not bad:
            return True, None
        bad_intervals = [(c, n) for c, n in bad if c.kind == "interval"]
        if bad_intervals:
            c0, n0 = bad_intervals[0]
            lo, hi = c0.lo, c0.hi
            lo_closed = any(
                c.kind in ("point", "vertex") and c.edge == c0.edge and c.lo == lo or
                (c.kind == "vertex" and self.forest.offset_on_edge(self.forest.vertex_point(c.vertex), c0.edge) == lo)
                for c, n in bad if c.component == c0.component
            )
            hi_closed = any(
                (c.kind == "point" and c.edge == c0.edge and c.lo == hi)
                or (c.kind == "vertex" and self.forest.offset_on_edge(self.forest.vertex_point(c.vertex), c0.edge) == hi)
                for c, n in bad if c.component == c0.component
            )
            witness = CoverageWitness(
                component=c0.component, edge=c0.edge, lo=lo, hi=hi,
                lo_closed=lo_closed, hi_closed=hi_closed, count=n0,
            )
        else:
            c0, n0 = bad[0]
            if c0.kind == "vertex":
                p = self.forest.vertex_point(c0.vertex)
                witness = CoverageWitness(c0.component, None, None, None, True, True, n0, point=p)
            else:
                p = self.forest.edge_point(c0.edge, c0.lo)
                witness = CoverageWitness(c0.component, c0.edge, c0.lo, c0.hi, True, True, n0, point=p)
        return False, witness

    def point_cover_count(self, p: Point) -> int:
        F = self.forest
        return sum(
            1
            for sl in self.signed_letters
            if F.subtree_contains(self.signed_domain(sl), p)
        )

    # -- reducedness ----------------------------------------------------------

    def check_reduced(self, depth: int) -> ReducednessReport:
        if depth < 1:
            raise ValueError("depth must be >= 1")
        F = self.forest
        notes: list[str] = []
        connected = self.system_graph(check_connected=False).is_connected()

        doubly = True
        for sl in self.signed_letters:
            for p in F.subtree_extremal_points(self.signed_domain(sl)):
                if self.point_cover_count(p) < 2:
                    doubly = False
                    notes.append(f"extremal point {p!r} of {sl} covered once")
                    break
            if not doubly:
                break

        max_diam: dict[int, Scalar] = {}
        covered_every_depth = True
        extendable = True
        comp_diam = max(
            (F.subtree_diameter(F.full_subtree(c.id)) for c in F.components),
            default=ZERO,
        )
        prev: list[AdmissibleWord] = []
        for k in range(1, depth + 1):
            words = self.admissible_words(k)
            if not words:
                covered_every_depth = False
                extendable = False
                notes.append(f"no admissible words at length {k}")
                break
            diam = ZERO
            for w in words:
                d = F.subtree_diameter(w.domain)
                if d > diam:
                    diam = d
            max_diam[k] = diam
            doms = [w.domain for w in words]
            cov = self.coverage_cells(doms)
            if any(n == 0 for _, n in cov):
                covered_every_depth = False
                notes.append(f"forest not covered by admissible domains at length {k}")
            if k > 1 and len(prev) > 0:
                extended = {w.word[:-1] for w in words}
                for w in prev:
                    if w.word not in extended:
                        extendable = False
                        notes.append(f"admissible word {w.word} has no admissible extension")
                        break
            prev = words

        diam_at_depth = max_diam.get(depth, ZERO)
        mid = max_diam.get(max(1, depth // 2), comp_diam)
        indep = diam_at_depth == ZERO or diam_at_depth < mid
        return ReducednessReport(
            depth=depth,
            graph_connected=connected,
            extremal_points_doubly_covered=doubly,
            independent_generators_up_to_depth=indep,
            every_point_has_infinite_path_up_to_depth=covered_every_depth and extendable,
            max_domain_diameter_at_depth=diam_at_depth,
            notes=notes,
        )

    # -- periodic leaves ---------------------------------------------------------

    def detect_periodic_leaf(self, max_period: int):
        """First cyclically-reduced admissible word (length <= max_period)
        whose composed isometry fixes a point, or None."""
        if max_period < 1:
            raise ValueError("max_period must be >= 1")

        def letter_key(sl):
            return (sl[0], 0 if sl[1] > 0 else 1)

        alphabet = sorted(self.signed_letters, key=letter_key)
        F = self.forest

        def search(word, image):
            if word:
                if not (word[-1][0] == word[0][0] and word[-1][1] == -word[0][1]):
                    p = self.fixed_point_of_word(word)
                    if p is not None:
                        return tuple(word)
            if len(word) == max_period:
                return None
            for sl in alphabet:
                if word and word[-1][0] == sl[0] and word[-1][1] == -sl[1]:
                    continue
                dom_sl = self.signed_domain(sl)
                if image is None:
                    nxt = dom_sl
                else:
                    hit = intersect_subtrees(F, image, dom_sl)
                    if not isinstance(hit, Subtree):
                        continue
                    nxt = self.map_subtree(sl, hit)
                word.append(sl)
                found = search(word, nxt)
                word.pop()
                if found:
                    return found
            return None

        return search([], None)

    def fixed_point_of_word(self, word) -> Point | None:
        """Exact fixed point of the composed partial isometry, if any."""
        word = tuple(word)
        D = self.domain_of_word(word)
        if D is None:
            return None
        I = self.image_of_word(word)
        if I.component != D.component:
            return None
        F = self.forest
        inv = inverse_word(word)

        # candidate points: extremal/vertex singularities of D plus preimages
        # of those of I
        cands: set[Point] = set(F.subtree_extremal_points(D))
        for v in D.vertices:
            cands.add(F.vertex_point(v))
        img_sing = set(F.subtree_extremal_points(I))
        for v in I.vertices:
            img_sing.add(F.vertex_point(v))
        for q in img_sing:
            cands.add(self.apply_word(inv, q))
        for p in sorted(cands, key=F.point_key):
            if self.apply_word(word, p) == p:
                return p

        # open cells of D between consecutive candidate offsets on each edge
        offsets: dict[int, set[Scalar]] = {}
        for eid, lo, hi in D.ranges:
            offsets.setdefault(eid, set()).update((lo, hi))
        for p in cands:
            if not p.is_vertex():
                rng = D.range_by_edge.get(p.edge)
                if rng and rng[0] <= p.offset <= rng[1]:
                    offsets.setdefault(p.edge, set()).add(p.offset)
        for eid, offs in offsets.items():
            rng = D.range_by_edge.get(eid)
            if rng is None:
                continue
            cuts = sorted(o for o in offs if rng[0] <= o <= rng[1])
            for lo, hi in zip(cuts, cuts[1:]):
                if lo == hi:
                    continue
                p1 = F.edge_point(eid, lo)
                p2 = F.edge_point(eid, hi)
                q1 = self.apply_word(word, p1)
                q2 = self.apply_word(word, p2)
                t1 = F.offset_on_edge(q1, eid)
                t2 = F.offset_on_edge(q2, eid)
                if t1 is None or t2 is None:
                    continue
                if t1 - lo == t2 - hi:
                    if t1 == lo:
                        return p1  # translation by zero: already caught, but be safe
                    continue
                center = (t1 + lo) / 2
                if lo < center < hi and (t2 + hi) / 2 == center:
                    return F.edge_point(eid, center)
        return None


@dataclass(frozen=True)
class CoverageWitness:
    component: int
    edge: int | None
    lo: Scalar | None
    hi: Scalar | None
    lo_closed: bool
    hi_closed: bool
    count: int
    point: Point | None = None
