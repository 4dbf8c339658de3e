"""Piecewise-monotone Markov interval maps and their cylinder structure.

A map is given by an ordered list of partition endpoints
``0 = e_0 < e_1 < ... < e_l = 1`` and one monotone expanding branch per
cell ``[e_{i-1}, e_i)``.  Branch images must be unions of cell closures
(Markov property), every branch must expand by a factor gamma > 1, and
some power of the cell-transition matrix must be strictly positive
(covering).  Cells are right-open; orbits of shared endpoints follow the
branch to the right, and x = 1 uses the last branch.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

ENDPOINT_TOL = 1e-9
BISECT_TOL = 1e-14
MAX_COVERING_POWER = 64


class MapDefinitionError(ValueError):
    """Raised when a map definition is structurally unusable."""


@dataclass(frozen=True)
class AffineBranch:
    """Branch x -> slope*x + offset on one partition cell."""

    slope: float
    offset: float

    def value(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.offset

    def derivative(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.slope)

    @property
    def is_affine(self):
        return True


@dataclass(frozen=True)
class SmoothBranch:
    """Branch given by a pair of vectorized evaluators (value, derivative).

    Monotonicity is certified by the caller and spot-checked on a grid by
    ``check_markov``; cylinder endpoints are recovered by bisection.
    """

    fn: object
    dfn: object

    def value(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    def derivative(self, x):
        return np.asarray(self.dfn(np.asarray(x, dtype=float)), dtype=float)

    @property
    def is_affine(self):
        return False


@dataclass(frozen=True)
class CylinderWord:
    """Admissible finite symbol sequence with its interval in [0, 1]."""

    symbols: tuple
    lo: float
    hi: float

    def __len__(self):
        return len(self.symbols)

    @property
    def midpoint(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def diameter(self):
        return self.hi - self.lo


@dataclass
class ValidationReport:
    """Per-condition outcome of the Markov-map checks."""

    conditions: dict = field(default_factory=dict)

    def record(self, name, ok, detail=""):
        self.conditions[name] = (bool(ok), detail)

    @property
    def passed(self):
        return all(ok for ok, _ in self.conditions.values())

    def failures(self):
        return {k: d for k, (ok, d) in self.conditions.items() if not ok}


class MarkovMap:
    """Markov interval map with uniformly expanding monotone branches.

    Parameters
    ----------
    endpoints : sequence of floats, 0 = e_0 < ... < e_l = 1.
    branches : one branch object per cell [e_{i-1}, e_i).
    holder_exponent : Hoelder exponent of the branch derivatives.
    transition : optional 0/1 matrix; inferred from branch images when
        omitted and cross-checked when given.
    """

    def __init__(self, endpoints, branches, holder_exponent=1.0, transition=None):
        self.endpoints = np.asarray(endpoints, dtype=float)
        if self.endpoints.ndim != 1 or len(self.endpoints) < 2:
            raise MapDefinitionError("need at least two endpoints")
        if abs(self.endpoints[0]) > 0 or abs(self.endpoints[-1] - 1.0) > 0:
            raise MapDefinitionError("partition must start at 0 and end at 1")
        if np.any(np.diff(self.endpoints) <= 0):
            raise MapDefinitionError("endpoints must be strictly increasing")
        if len(branches) != len(self.endpoints) - 1:
            raise MapDefinitionError("need exactly one branch per cell")
        self.branches = list(branches)
        self.holder_exponent = float(holder_exponent)

        self._images = [self._branch_image(i) for i in range(self.n_cells)]
        inferred = self._infer_transition()
        if transition is None:
            self.transition = inferred
        else:
            self.transition = np.asarray(transition, dtype=int)
            if self.transition.shape != inferred.shape or np.any(
                self.transition != inferred
            ):
                raise MapDefinitionError(
                    "supplied transition matrix disagrees with branch images"
                )
        self.covering_exponent = self._covering_exponent()
        self.gamma = self._expansion_bound()
        self._slopes = (
            np.array([b.slope for b in self.branches])
            if self.is_affine
            else None
        )
        self._offsets = (
            np.array([b.offset for b in self.branches])
            if self.is_affine
            else None
        )
        # memoized cylinder levels; the map is immutable, so concurrent
        # readers can at worst recompute a level
        self._refine_cache = {}

    # -- basic structure -------------------------------------------------

    @property
    def n_cells(self):
        return len(self.endpoints) - 1

    @property
    def is_affine(self):
        return all(b.is_affine for b in self.branches)

    def cell_of(self, x):
        """Cell index of x; right-open cells, x = 1 belongs to the last cell."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.endpoints, x, side="right") - 1
        return np.clip(idx, 0, self.n_cells - 1)

    def cell_interval(self, i):
        return float(self.endpoints[i]), float(self.endpoints[i + 1])

    def _branch_image(self, i):
        lo, hi = self.cell_interval(i)
        a = float(self.branches[i].value(lo))
        b = float(self.branches[i].value(hi))
        a, b = (a, b) if a <= b else (b, a)
        # snap to partition points: Markov images are unions of cells, so
        # float drift in branch evaluation should not leak into cylinders
        return self._snap(a), self._snap(b)

    def _snap(self, v):
        j = int(np.argmin(np.abs(self.endpoints - v)))
        return float(self.endpoints[j]) if abs(self.endpoints[j] - v) <= ENDPOINT_TOL else v

    def branch_image(self, i):
        """Closure of T(cell i) as an interval."""
        return self._images[i]

    def _infer_transition(self):
        t = np.zeros((self.n_cells, self.n_cells), dtype=int)
        for i in range(self.n_cells):
            a, b = self._images[i]
            for j in range(self.n_cells):
                lo, hi = self.cell_interval(j)
                # cell j is covered when its closure sits inside the image
                if lo >= a - ENDPOINT_TOL and hi <= b + ENDPOINT_TOL:
                    t[i, j] = 1
        return t

    def _covering_exponent(self):
        reach = self.transition.astype(bool)
        power = reach.copy()
        for n in range(1, MAX_COVERING_POWER + 1):
            if power.all():
                return n
            power = power @ reach
        return None

    def _expansion_bound(self):
        worst = np.inf
        for i in range(self.n_cells):
            lo, hi = self.cell_interval(i)
            if self.branches[i].is_affine:
                worst = min(worst, abs(self.branches[i].slope))
            else:
                xs = np.linspace(lo, hi, 257)
                worst = min(worst, float(np.min(np.abs(self.branches[i].derivative(xs)))))
        return worst

    # -- dynamics --------------------------------------------------------

    def apply(self, x):
        """One step of the map, vectorized over x."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        idx = self.cell_of(x)
        if self.is_affine:
            out = self._slopes[idx] * x + self._offsets[idx]
        else:
            out = np.empty_like(x)
            for i in range(self.n_cells):
                m = idx == i
                if np.any(m):
                    out[m] = self.branches[i].value(x[m])
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if scalar else out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        idx = self.cell_of(x)
        if self.is_affine:
            out = self._slopes[idx].astype(float)
        else:
            out = np.empty_like(x)
            for i in range(self.n_cells):
                m = idx == i
                if np.any(m):
                    out[m] = self.branches[i].derivative(x[m])
        return float(out[0]) if scalar else out

    def iterate(self, x, n):
        """T^n(x) with the right-open endpoint convention."""
        if n < 0:
            raise ValueError("n must be >= 0")
        y = x
        for _ in range(n):
            y = self.apply(y)
        return y

    # -- cylinders -------------------------------------------------------

    def _invert_branch_vec(self, i, y_lo, y_hi):
        """Preimages of [y_lo, y_hi] pairs under branch i, clipped to cell i."""
        lo, hi = self.cell_interval(i)
        br = self.branches[i]
        if br.is_affine:
            a = (y_lo - br.offset) / br.slope
            b = (y_hi - br.offset) / br.slope
            u, v = np.minimum(a, b), np.maximum(a, b)
        else:
            increasing = float(br.value(hi)) >= float(br.value(lo))
            if increasing:
                u = _bisect_monotone_vec(br.value, lo, hi, y_lo, True)
                v = _bisect_monotone_vec(br.value, lo, hi, y_hi, True)
            else:
                u = _bisect_monotone_vec(br.value, lo, hi, y_hi, False)
                v = _bisect_monotone_vec(br.value, lo, hi, y_lo, False)
        return np.maximum(u, lo), np.minimum(v, hi)

    def _refine_arrays(self, n):
        if n in self._refine_cache:
            return self._refine_cache[n]
        if n == 1:
            words = [(i,) for i in range(self.n_cells)]
            lo = self.endpoints[:-1].copy()
            hi = self.endpoints[1:].copy()
        else:
            words_prev, lo_prev, hi_prev = self._refine_arrays(n - 1)
            first = np.fromiter((w[0] for w in words_prev), dtype=int,
                                count=len(words_prev))
            words, lo_parts, hi_parts = [], [], []
            for i in range(self.n_cells):
                sel = np.flatnonzero(self.transition[i, first])
                if sel.size == 0:
                    continue
                img_lo, img_hi = self._images[i]
                t_lo = np.clip(lo_prev[sel], img_lo, img_hi)
                t_hi = np.clip(hi_prev[sel], img_lo, img_hi)
                u, v = self._invert_branch_vec(i, t_lo, t_hi)
                words.extend((i,) + words_prev[s] for s in sel)
                lo_parts.append(u)
                hi_parts.append(v)
            lo = np.concatenate(lo_parts)
            hi = np.concatenate(hi_parts)
        self._refine_cache[n] = (words, lo, hi)
        return self._refine_cache[n]

    def refine(self, n):
        """All admissible length-n cylinders with their intervals.

        Returns a list of CylinderWord sorted lexicographically by symbols
        (cell-major recursion keeps them sorted by construction).
        """
        if n < 1:
            raise ValueError("refinement level must be >= 1")
        words, lo, hi = self._refine_arrays(n)
        return [CylinderWord(w, float(a), float(b))
                for w, a, b in zip(words, lo, hi)]

    def is_admissible(self, symbols):
        return all(
            self.transition[a, b] for a, b in zip(symbols[:-1], symbols[1:])
        )


def _bisect_monotone_vec(fn, lo, hi, targets, increasing):
    """Solve fn(x) = target on [lo, hi] for monotone fn, vectorized over
    targets; 60 halvings take the bracket below 1e-14."""
    targets = np.asarray(targets, dtype=float)
    a = np.full_like(targets, lo)
    b = np.full_like(targets, hi)
    for _ in range(60):
        m = 0.5 * (a + b)
        go_right = (np.asarray(fn(m)) < targets) == increasing
        a = np.where(go_right, m, a)
        b = np.where(go_right, b, m)
    return 0.5 * (a + b)


def check_markov(markov_map, grid_per_cell=256):
    """Validate conditions on partition, smoothness, Markov images,
    expansion and covering; failures carry a witness."""
    m = markov_map
    report = ValidationReport()

    diffs = np.diff(m.endpoints)
    report.record(
        "partition",
        np.all(diffs > 0) and m.endpoints[0] == 0.0 and m.endpoints[-1] == 1.0,
        "endpoints sorted, spanning [0,1]",
    )

    bad_cell = None
    for i in range(m.n_cells):
        lo, hi = m.cell_interval(i)
        xs = np.linspace(lo, hi, grid_per_cell)
        dv = m.branches[i].derivative(xs)
        vals = m.branches[i].value(xs)
        monotone = np.all(np.diff(vals) > 0) or np.all(np.diff(vals) < 0)
        if not monotone or np.any(dv == 0):
            bad_cell = (i, float(xs[int(np.argmin(np.abs(dv)))]))
            break
    report.record(
        "monotone_branches",
        bad_cell is None,
        "" if bad_cell is None else f"cell {bad_cell[0]} near x={bad_cell[1]:.6g}",
    )

    witness = None
    for i in range(m.n_cells):
        a, b = m.branch_image(i)
        for v in (a, b):
            if np.min(np.abs(m.endpoints - v)) > ENDPOINT_TOL:
                witness = (i, v)
                break
        if witness:
            break
    report.record(
        "markov_images",
        witness is None,
        ""
        if witness is None
        else f"image endpoint {witness[1]:.6g} of cell {witness[0]} "
        "is not a partition point",
    )

    report.record(
        "uniform_expansion",
        m.gamma > 1.0,
        f"inf |T'| = {m.gamma:.6g}",
    )

    report.record(
        "covering",
        m.covering_exponent is not None,
        f"N = {m.covering_exponent}"
        if m.covering_exponent is not None
        else f"transition^N not positive for N <= {MAX_COVERING_POWER}",
    )
    return report


# -- stock map families --------------------------------------------------

def linear_full_map(k):
    """x -> k*x mod 1 on k equal cells."""
    if k < 2:
        raise MapDefinitionError("need at least 2 branches")
    endpoints = np.linspace(0.0, 1.0, k + 1)
    branches = [AffineBranch(float(k), -float(i)) for i in range(k)]
    return MarkovMap(endpoints, branches)


def doubling_map():
    return linear_full_map(2)


def tripling_map():
    return linear_full_map(3)


def piecewise_linear_map(endpoints, slopes_offsets, holder_exponent=1.0):
    branches = [AffineBranch(float(s), float(o)) for s, o in slopes_offsets]
    return MarkovMap(endpoints, branches, holder_exponent=holder_exponent)


def golden_mean_map():
    """Two-cell Markov map with transition [[1,1],[1,0]]."""
    return piecewise_linear_map(
        [0.0, 2.0 / 3.0, 1.0], [(1.5, 0.0), (2.0, -4.0 / 3.0)]
    )


def perturbed_full_map(k=2, epsilon=0.1):
    """Smooth full-branch perturbation of x -> k*x mod 1.

    On cell i the branch is u + eps*sin(pi*u) with u = k*x - i, which fixes
    the cell images at [0,1]; expansion requires eps < (1 - 1/k)/pi.
    """
    if not 0 <= epsilon < (1.0 - 1.0 / k) / np.pi:
        raise MapDefinitionError("epsilon too large for uniform expansion")
    endpoints = np.linspace(0.0, 1.0, k + 1)

    def make(i):
        def fn(x):
            u = k * np.asarray(x, dtype=float) - i
            return u + epsilon * np.sin(np.pi * u)

        def dfn(x):
            u = k * np.asarray(x, dtype=float) - i
            return k * (1.0 + epsilon * np.pi * np.cos(np.pi * u))

        return SmoothBranch(fn, dfn)

    return MarkovMap(endpoints, [make(i) for i in range(k)])


def enumerate_words(transition, n):
    """Brute-force admissible words of length n (test oracle helper)."""
    l = transition.shape[0]
    words = []
    for w in itertools.product(range(l), repeat=n):
        if all(transition[a, b] for a, b in zip(w[:-1], w[1:])):
            words.append(w)
    return words
