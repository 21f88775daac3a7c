"""Support hypergraphs of candidate exact attacks.

Each output basis vector is a vertex (2d per side); the support of an
attack's output state is an edge colored by the ancilla index s, drawn
"inner" for input bit x=0 and "outer" for x=1.  Local consistency rules
plus a cross-side orthogonality rule reproduce the d=2 and d=3 no-go
results by pure enumeration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

__all__ = [
    "EdgeSet", "GraphSide", "GraphPair",
    "enumerate_inner_configs", "enumerate_sides",
    "check_rule_v", "nogo_scan",
]


def _popcount(mask):
    return bin(mask).count("1")


def _bits(mask):
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


@dataclass(frozen=True)
class EdgeSet:
    """The d color-indexed supports on one x layer of a side."""

    d: int
    supports: tuple  # bitmasks over 2d vertices, indexed by color s

    def __post_init__(self):
        if len(self.supports) != self.d:
            raise ValueError("need exactly d supports")
        for m in self.supports:
            k = _popcount(m)
            if not 2 <= k <= 2 * self.d - 2:
                raise ValueError(
                    f"support size {k} outside [2, {2 * self.d - 2}]"
                )


@dataclass(frozen=True)
class GraphSide:
    """Inner (x=0) and outer (x=1) edges of one b value; rule I pairs
    inner[s] with outer[s]."""

    inner: EdgeSet
    outer: EdgeSet

    @property
    def d(self):
        return self.inner.d

    def color_pairs(self):
        return tuple(zip(self.inner.supports, self.outer.supports))


@dataclass(frozen=True)
class GraphPair:
    b0: GraphSide
    b1: GraphSide


# -- local rules (one side) ---------------------------------------------------

def _pairwise_ok(masks):
    """No single-vertex overlaps; length-2 edges touch no other edge."""
    for i, a in enumerate(masks):
        for j, b in enumerate(masks):
            if j <= i:
                continue
            k = _popcount(a & b)
            if k == 1:
                return False
            if k and (_popcount(a) == 2 or _popcount(b) == 2):
                return False
    return True


def _component_counts_ok(masks):
    """Per connected component of overlapping edges, the unit norms of
    the states must pay the half-weight of every covered vertex, so the
    vertex count is exactly twice the edge count."""
    unseen = list(range(len(masks)))
    while unseen:
        comp = {unseen.pop()}
        grown = True
        while grown:
            grown = False
            for i in list(unseen):
                if any(masks[i] & masks[j] for j in comp):
                    comp.add(i)
                    unseen.remove(i)
                    grown = True
        vertices = 0
        for i in comp:
            vertices |= masks[i]
        if _popcount(vertices) != 2 * len(comp):
            return False
    return True


def _family_ok(masks, n_vertices):
    """Rules that bind the edges of a single x layer: full coverage, no
    commonly covered vertex, pairwise overlap rules, and the per-component
    norm budget."""
    cover = 0
    common = (1 << n_vertices) - 1
    for m in masks:
        cover |= m
        common &= m
    if cover != (1 << n_vertices) - 1:
        return False
    if common:
        return False
    return _pairwise_ok(masks) and _component_counts_ok(masks)


def _partial_family_ok(masks, n_vertices):
    """Prefix checks used while building a layer edge by edge."""
    return _pairwise_ok(masks)


def _cross_ok(inner_masks, outer_masks):
    """Same-side orthogonality across the two x layers: edges may not
    overlap in exactly one vertex."""
    for a in inner_masks:
        for b in outer_masks:
            if _popcount(a & b) == 1:
                return False
    return True


def _apply_vertex_perm(mask, perm):
    out = 0
    for i in _bits(mask):
        out |= 1 << perm[i]
    return out


def _side_form(pairs):
    return tuple(sorted(pairs))


def canonical_side(side: GraphSide, include_swap=True):
    """Lexicographically smallest relabeling of a side under vertex
    permutations, color permutations, and (optionally) the inner/outer
    exchange."""
    n = 2 * side.d
    variants = [side.color_pairs()]
    if include_swap:
        variants.append(tuple((o, i) for i, o in side.color_pairs()))
    best = None
    for perm in itertools.permutations(range(n)):
        for pairs in variants:
            form = _side_form(
                tuple(
                    (_apply_vertex_perm(i, perm), _apply_vertex_perm(o, perm))
                    for i, o in pairs
                )
            )
            if best is None or form < best:
                best = form
    return best


def _all_supports(d):
    n = 2 * d
    return [
        m for m in range(1, 1 << n) if 2 <= _popcount(m) <= 2 * d - 2
    ]


def enumerate_inner_configs(d, canonical=True):
    """All single-layer edge families obeying the local rules; with
    canonical=True, one representative per vertex-relabeling class."""
    if d > 4:
        raise ValueError("enumeration supported for d <= 4")
    supports = _all_supports(d)
    n = 2 * d
    configs = []

    def rec(start, chosen):
        if len(chosen) == d:
            if _family_ok(chosen, n):
                configs.append(tuple(chosen))
            return
        for idx in range(start, len(supports)):
            chosen.append(supports[idx])
            if _partial_family_ok(chosen, n):
                rec(idx, chosen)
            chosen.pop()

    rec(0, [])
    if not canonical:
        return configs
    seen = {}
    for cfg in configs:
        best = min(
            tuple(sorted(_apply_vertex_perm(m, p) for m in cfg))
            for p in itertools.permutations(range(n))
        )
        seen.setdefault(best, cfg)
    return list(seen.values())


def enumerate_sides(d, canonical=True):
    """All GraphSides obeying rules I-IV; canonical de-duplicates under
    the side symmetry group."""
    if d > 4:
        raise ValueError("enumeration supported for d <= 4")
    supports = _all_supports(d)
    n = 2 * d
    sides = []
    for inner in enumerate_inner_configs(d, canonical=False):
        # attach an outer edge to each color, disjoint from its inner twin
        def rec(pos, chosen):
            if pos == d:
                if _family_ok(chosen, n) and _cross_ok(inner, chosen):
                    sides.append(
                        GraphSide(
                            inner=EdgeSet(d=d, supports=tuple(inner)),
                            outer=EdgeSet(d=d, supports=tuple(chosen)),
                        )
                    )
                return
            for m in supports:
                if m & inner[pos]:
                    continue
                chosen.append(m)
                if _partial_family_ok(chosen, n) and _cross_ok(inner, chosen):
                    rec(pos + 1, chosen)
                chosen.pop()

        rec(0, [])
    if not canonical:
        return sides
    seen = {}
    for side in sides:
        seen.setdefault(canonical_side(side), side)
    return list(seen.values())


# -- cross-side consistency (rule V) ------------------------------------------

def _states(pair: GraphPair):
    """Flat list of (b, x, s, support) for the 4d states of a pair."""
    out = []
    for b, side in ((0, pair.b0), (1, pair.b1)):
        for x, layer in ((0, side.inner), (1, side.outer)):
            for s, m in enumerate(layer.supports):
                out.append((b, x, s, m))
    return out


def _orthogonality(pair: GraphPair):
    """Known pairwise orthogonality among the 4d states: everything at
    equal b, plus the cross-side color pairs triggered by rule V (one
    disjoint (x, y) combination orthogonalizes all four)."""
    states = _states(pair)
    k = len(states)
    orth = [[False] * k for _ in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            if states[i][0] == states[j][0]:
                orth[i][j] = orth[j][i] = True
    d = pair.b0.d
    for s in range(d):
        for t in range(d):
            left = [pair.b0.inner.supports[s], pair.b0.outer.supports[s]]
            right = [pair.b1.inner.supports[t], pair.b1.outer.supports[t]]
            if any(a & b == 0 for a in left for b in right):
                for x in range(2):
                    for y in range(2):
                        i = x * d + s
                        j = 2 * d + y * d + t
                        orth[i][j] = orth[j][i] = True
    return states, orth


def _max_clique(adj, nodes):
    """Exact maximum clique by branch and bound (tiny instances)."""
    best = []

    def rec(clique, candidates):
        nonlocal best
        if len(clique) > len(best):
            best = clique[:]
        for idx, v in enumerate(candidates):
            if len(clique) + len(candidates) - idx <= len(best):
                return
            rec(
                clique + [v],
                [w for w in candidates[idx + 1 :] if adj[v][w]],
            )

    rec([], list(nodes))
    return best


def check_rule_v(pair: GraphPair):
    """Dimension-count consistency of a pair.

    If k mutually orthogonal states have all pairwise support overlaps
    inside a vertex set T that every one of them touches, their
    restrictions to T are k nonzero orthogonal vectors in a |T|-dim
    space, so k > |T| is a contradiction.  Returns (consistent, witness);
    the witness names T and the offending states.
    """
    states, orth = _orthogonality(pair)
    n = 2 * pair.b0.d
    for t_mask in range(1, 1 << n):
        t_size = _popcount(t_mask)
        if t_size >= n - 1:
            continue
        nodes = [
            i for i, (_, _, _, m) in enumerate(states) if m & t_mask
        ]
        # admissible pairs: known orthogonality with overlap inside T
        adj = [
            [
                orth[i][j]
                and (states[i][3] & states[j][3]) & ~t_mask == 0
                for j in range(len(states))
            ]
            for i in range(len(states))
        ]
        clique = _max_clique(adj, nodes)
        if len(clique) > t_size:
            witness = {
                "T": _bits(t_mask),
                "states": [states[i][:3] for i in clique],
                "count": len(clique),
            }
            return False, witness
    return True, None


def _canonical_pair(pair: GraphPair):
    """Canonical form under simultaneous vertex relabeling, independent
    color relabeling per side, and independent inner/outer swaps."""
    n = 2 * pair.b0.d

    def side_variants(side):
        base = side.color_pairs()
        return (base, tuple((o, i) for i, o in base))

    best = None
    for perm in itertools.permutations(range(n)):
        for p0 in side_variants(pair.b0):
            f0 = _side_form(
                tuple(
                    (_apply_vertex_perm(i, perm), _apply_vertex_perm(o, perm))
                    for i, o in p0
                )
            )
            for p1 in side_variants(pair.b1):
                f1 = _side_form(
                    tuple(
                        (_apply_vertex_perm(i, perm), _apply_vertex_perm(o, perm))
                        for i, o in p1
                    )
                )
                if best is None or (f0, f1) < best:
                    best = (f0, f1)
    return best


def nogo_scan(d):
    """Exhaustively pair up sides and count the classes that survive the
    consistency check."""
    if d not in (2, 3):
        raise ValueError("nogo scan supports d = 2 and d = 3")
    reps = enumerate_sides(d, canonical=True)
    concrete = enumerate_sides(d, canonical=False)
    tested = {}
    for b0 in reps:
        for b1 in concrete:
            pair = GraphPair(b0=b0, b1=b1)
            key = _canonical_pair(pair)
            if key not in tested:
                tested[key] = pair
    consistent = {}
    for key, pair in tested.items():
        ok, _ = check_rule_v(pair)
        if ok:
            consistent[key] = pair
    return {
        "d": d,
        "sides_count": len(reps),
        "pairs_tested": len(tested),
        "consistent_pairs": len(consistent),
        "consistent_examples": list(consistent.values()),
    }
