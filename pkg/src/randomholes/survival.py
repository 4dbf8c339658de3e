"""Symbolic analysis of hole-avoiding orbits.

Cylinders whose closure meets the open hole are discarded (conservative:
the surviving set is under-approximated and the verdict must stabilize
under refinement).  The remaining cylinders form a subshift graph; a
cycle certifies a non-empty survivor set, and for piecewise-linear maps
the Bowen root of the weighted spectral radius gives the Hausdorff
dimension of the avoidance set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .noise import DiscreteHoleModel, NoiseModel

SPRAD_DENSE_LIMIT = 1500


def _as_intervals(forbidden):
    if forbidden is None:
        return []
    if isinstance(forbidden, tuple) and len(forbidden) == 2 and np.isscalar(forbidden[0]):
        forbidden = [forbidden]
    return [(float(a), float(b)) for a, b in forbidden if b > a]


def hole_regions(noise, markov_map):
    """(open region where g < 1, open region where g = 0) for either mode."""
    if isinstance(noise, DiscreteHoleModel):
        return noise.max_hole(markov_map), noise.certain_hole(markov_map)
    if isinstance(noise, NoiseModel):
        return noise.max_hole(), noise.certain_hole()
    raise TypeError(f"unsupported noise model {type(noise)!r}")


@dataclass
class SubshiftGraph:
    """Admissible level-n cylinders away from the forbidden open region,
    with edges for admissible one-step extensions."""

    level: int
    nodes: list                      # CylinderWord, sorted by symbols
    edges: list                      # (src_idx, dst_idx)
    markov_map: object
    forbidden: list = field(default_factory=list)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def index(self):
        return {c.symbols: k for k, c in enumerate(self.nodes)}

    def adjacency(self):
        a = np.zeros((self.n_nodes, self.n_nodes))
        for s, d in self.edges:
            a[s, d] = 1.0
        return a

    def out_lists(self):
        out = [[] for _ in range(self.n_nodes)]
        for s, d in self.edges:
            out[s].append(d)
        return out


def build_avoidance_graph(markov_map, forbidden, n):
    """Subshift of level-n cylinders whose closure avoids the open region.

    `forbidden` is an open interval (lo, hi), a list of such intervals, or
    None/empty for the full system.
    """
    ivs = _as_intervals(forbidden)
    nodes = []
    for c in markov_map.refine(n):
        # closed [lo, hi] meets open (a, b) iff lo < b and hi > a
        if any(c.lo < b and c.hi > a for a, b in ivs):
            continue
        nodes.append(c)
    by_prefix = {}
    for k, c in enumerate(nodes):
        by_prefix.setdefault(c.symbols[:-1], []).append(k)
    edges = []
    for s, c in enumerate(nodes):
        for d in by_prefix.get(c.symbols[1:], []):
            if markov_map.transition[c.symbols[-1], nodes[d].symbols[-1]]:
                edges.append((s, d))
    return SubshiftGraph(n, nodes, edges, markov_map, ivs)


@dataclass
class WitnessResult:
    nonempty: bool
    cycle_nodes: list = field(default_factory=list)
    periodic_word: tuple = ()


def is_survivor_set_nonempty(graph):
    """Cycle search; the witness is the periodic symbol word whose
    length-n windows run around the cycle."""
    out = graph.out_lists()
    color = np.zeros(graph.n_nodes, dtype=np.int8)  # 0 new, 1 active, 2 done
    parent = {}
    for root in range(graph.n_nodes):
        if color[root]:
            continue
        stack = [(root, iter(out[root]))]
        color[root] = 1
        while stack:
            v, it = stack[-1]
            advanced = False
            for w in it:
                if color[w] == 0:
                    color[w] = 1
                    parent[w] = v
                    stack.append((w, iter(out[w])))
                    advanced = True
                    break
                if color[w] == 1:
                    cycle = [v]
                    while cycle[-1] != w:
                        cycle.append(parent[cycle[-1]])
                    cycle.reverse()
                    word = tuple(graph.nodes[k].symbols[0] for k in cycle)
                    return WitnessResult(True, [graph.nodes[k] for k in cycle], word)
            if not advanced:
                color[v] = 2
                stack.pop()
    return WitnessResult(False)


def surviving_nodes(graph):
    """Nodes with an infinite forward path (prune dead ends to fixpoint)."""
    out = graph.out_lists()
    alive = np.ones(graph.n_nodes, dtype=bool)
    changed = True
    while changed:
        changed = False
        for v in range(graph.n_nodes):
            if alive[v] and not any(alive[w] for w in out[v]):
                alive[v] = False
                changed = True
    return {graph.nodes[v].symbols for v in range(graph.n_nodes) if alive[v]}


def mu_hat_support(markov_map, noise, n):
    """Level-n cylinders carrying the open equilibrium measure: avoidance
    graph of the certain-death region, restricted to eventually-surviving
    states."""
    _, certain = hole_regions(noise, markov_map)
    graph = build_avoidance_graph(markov_map, certain, n)
    return surviving_nodes(graph)


# -- Bowen dimension -------------------------------------------------------

@dataclass
class BowenResult:
    dimension: float
    lower: float
    upper: float
    exact: bool
    empty: bool = False


def _spectral_radius(weights_matrix):
    m = weights_matrix.shape[0]
    if m == 0:
        return 0.0
    if m <= SPRAD_DENSE_LIMIT:
        return float(np.max(np.abs(np.linalg.eigvals(weights_matrix))))
    v = np.ones(m)
    lam = 0.0
    for _ in range(500):
        w = weights_matrix @ v
        nrm = float(np.max(np.abs(w)))
        if nrm == 0.0:
            return 0.0
        lam = nrm
        v = w / nrm
    return lam


def _dimension_root(log_derivs, src, dst, m, tol):
    """Bisection root of sprad(exp(-s*log_derivs) on edges) = 1 in [0,1]."""

    def sprad(s):
        a = np.zeros((m, m))
        a[src, dst] = np.exp(-s * log_derivs)
        return _spectral_radius(a)

    top = sprad(0.0)
    if top < 1.0:
        return 0.0, True
    if abs(top - 1.0) < 1e-12:
        return 0.0, False
    if abs(sprad(1.0) - 1.0) < 1e-12:
        return 1.0, False
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if sprad(mid) >= 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), False


def bowen_dimension(markov_map, graph, tol=1e-10, deriv_grid=64):
    """Scaling exponent s* with unit spectral radius of the |T'|^{-s}
    weighted subshift; the Hausdorff dimension of the avoidance set for
    piecewise-linear maps, honest bounds otherwise."""
    if graph.n_nodes == 0 or not graph.edges:
        return BowenResult(0.0, 0.0, 0.0, exact=markov_map.is_affine, empty=True)
    src = np.array([s for s, _ in graph.edges])
    dst = np.array([d for _, d in graph.edges])
    m = graph.n_nodes
    if markov_map.is_affine:
        slopes = np.array([abs(b.slope) for b in markov_map.branches])
        logd = np.log(slopes[[graph.nodes[s].symbols[0] for s in src]])
        s_star, empty = _dimension_root(logd, src, dst, m, tol)
        return BowenResult(s_star, s_star, s_star, exact=True, empty=empty)
    log_lo = np.empty(len(src))
    log_hi = np.empty(len(src))
    for e, s in enumerate(src):
        c = graph.nodes[s]
        xs = np.linspace(c.lo, c.hi, deriv_grid)
        d = np.abs(markov_map.derivative(xs))
        log_lo[e] = np.log(np.min(d))
        log_hi[e] = np.log(np.max(d))
    # smaller derivatives -> larger weights -> larger root
    upper, empty_u = _dimension_root(log_lo, src, dst, m, tol)
    lower, _ = _dimension_root(log_hi, src, dst, m, tol)
    return BowenResult(0.5 * (lower + upper), lower, upper,
                       exact=False, empty=empty_u)


def box_counting_estimate(markov_map, forbidden, n, m_max):
    """Slope of log(surviving cylinder count) against m*log(gamma).

    Counts length-m words all of whose level-n windows survive, for
    m = n..m_max, by dynamic programming on the avoidance graph.
    """
    graph = build_avoidance_graph(markov_map, forbidden, n)
    if graph.n_nodes == 0:
        return 0.0, []
    out = graph.out_lists()
    counts = np.ones(graph.n_nodes)
    ms, logs = [], []
    for m in range(n, m_max + 1):
        total = float(np.sum(counts))
        if total <= 0:
            break
        ms.append(m)
        logs.append(np.log(total))
        nxt = np.zeros_like(counts)
        for v in range(graph.n_nodes):
            for w in out[v]:
                nxt[v] += counts[w]
        counts = nxt
    ms = np.asarray(ms, dtype=float)
    logs = np.asarray(logs)
    slope = float(np.polyfit(ms * np.log(markov_map.gamma), logs, 1)[0])
    return slope, list(zip(ms.astype(int), logs))
