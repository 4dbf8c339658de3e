"""Random hole models.

Continuous mode: i.i.d. radii in [0, 1/2] with law theta (atoms plus a
piecewise-uniform density), holes (x0 - w, x0 + w) around a fixed center.
The survival function g(x) = theta([0, |x - x0|]) is the probability that
x escapes the current hole; psi = log g is the potential correction that
reduces the averaged open operator to a closed one.

Discrete mode: finitely many holes, each a union of Markov cylinders at a
declared level, selected i.i.d. with fixed probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .potentials import Potential, piecewise_constant

MASS_TOL = 1e-12


@dataclass(frozen=True)
class NoiseModel:
    """Hole-radius law: atoms [(radius, mass)] plus piecewise-uniform
    density pieces [(lo, hi, value)] on [0, 1/2], centered at x0."""

    center: float
    atoms: tuple = ()
    density_pieces: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms",
                           tuple((float(r), float(p)) for r, p in self.atoms))
        object.__setattr__(
            self,
            "density_pieces",
            tuple((float(a), float(b), float(d)) for a, b, d in self.density_pieces),
        )
        if not 0.0 <= self.center <= 1.0:
            raise ValueError("hole center must lie in [0, 1]")
        for r, p in self.atoms:
            if not 0.0 <= r <= 0.5 or p <= 0:
                raise ValueError(f"bad atom (radius={r}, mass={p})")
        spans = []
        for a, b, d in self.density_pieces:
            if not 0.0 <= a < b <= 0.5 or d < 0:
                raise ValueError(f"bad density piece ({a}, {b}, {d})")
            spans.append((a, b))
        spans.sort()
        for (a1, b1), (a2, b2) in zip(spans[:-1], spans[1:]):
            if a2 < b1 - MASS_TOL:
                raise ValueError("density pieces overlap")
        if abs(self.total_mass() - 1.0) > MASS_TOL:
            raise ValueError(f"radius law mass {self.total_mass()} != 1")

    def total_mass(self):
        return sum(p for _, p in self.atoms) + sum(
            d * (b - a) for a, b, d in self.density_pieces
        )

    @property
    def mass_at_zero(self):
        return sum(p for r, p in self.atoms if r == 0.0)

    @property
    def support(self):
        """[a, b] = support of the radius law."""
        lows, highs = [], []
        for r, p in self.atoms:
            lows.append(r)
            highs.append(r)
        for a, b, d in self.density_pieces:
            if d > 0:
                lows.append(a)
                highs.append(b)
        if not lows:
            raise ValueError("radius law has empty support")
        return min(lows), max(highs)

    # -- radial CDF ------------------------------------------------------

    def cdf(self, r):
        """theta([0, r]), right-closed so atoms at r are included."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for rad, p in self.atoms:
            out = out + p * (r >= rad)
        for a, b, d in self.density_pieces:
            out = out + d * np.clip(r - a, 0.0, b - a)
        return out

    def cdf_integral(self, upper):
        """Exact integral of the CDF over [0, upper]."""
        if upper <= 0:
            return 0.0
        total = 0.0
        for rad, p in self.atoms:
            total += p * max(0.0, upper - rad)
        for a, b, d in self.density_pieces:
            # contribution d * integral of clip(r - a, 0, b - a) dr
            t1 = np.clip(upper - a, 0.0, b - a)
            total += d * (0.5 * t1 * t1 + (b - a) * max(0.0, upper - b))
        return total

    @property
    def jump_radii(self):
        return sorted(r for r, p in self.atoms if r > 0.0)

    # -- x-space views ---------------------------------------------------

    def g_breakpoints(self):
        """Points of [0,1] where g is non-smooth (jumps and density edges)."""
        pts = {0.0, 1.0}
        radii = set(self.jump_radii)
        for a, b, d in self.density_pieces:
            radii.update((a, b))
        for r in radii:
            for x in (self.center - r, self.center + r):
                if 0.0 < x < 1.0:
                    pts.add(x)
        return np.array(sorted(pts))

    def survival_function(self):
        """g as a Potential: g(x) = theta([0, |x - x0|]).

        The evaluator is the exact radial CDF (so boundary points such as
        x with |x - x0| equal to an atom radius get their right-closed
        value); for purely atomic laws the piecewise-constant breakpoints
        and interior values are attached so operator assembly can detect
        exact mode.
        """
        center = self.center
        breaks = self.g_breakpoints()

        def fn(x):
            return self.cdf(np.abs(np.asarray(x, dtype=float) - center))

        if not any(d > 0 for _, _, d in self.density_pieces):
            mids = 0.5 * (breaks[:-1] + breaks[1:])
            return Potential(fn, alpha=1.0, pieces=breaks, seminorm=0.0,
                             breakpoints=breaks, values=fn(mids))
        return Potential(fn, alpha=1.0, pieces=breaks)

    def psi(self):
        """psi = log g; requires g > 0 everywhere, i.e. theta({0}) > 0."""
        if self.mass_at_zero <= 0.0:
            raise ValueError(
                "psi unbounded: averaged-operator reduction requires "
                "theta({0}) > 0 or a discrete no-hole event"
            )
        g = self.survival_function()
        if g.is_piecewise_constant:
            return Potential(lambda x: np.log(g(x)), alpha=g.alpha,
                             pieces=g.pieces, seminorm=0.0,
                             breakpoints=g.breakpoints, values=np.log(g.values))
        return Potential(lambda x: np.log(g(x)), alpha=g.alpha, pieces=g.pieces)

    def g_integral(self):
        """Exact integral of g over [0, 1]."""
        return self.cdf_integral(self.center) + self.cdf_integral(1.0 - self.center)

    def max_hole(self):
        """Open region where g < 1 (points at risk of dying)."""
        _, b = self.support
        return _clip_interval(self.center - b, self.center + b)

    def certain_hole(self):
        """Open region where g = 0 (points that die at every exposure)."""
        a, _ = self.support
        return _clip_interval(self.center - a, self.center + a)

    # -- sampling ----------------------------------------------------------

    sampler_id = "philox4x64/inverse-cdf-v1"

    def _segments(self):
        segs = []
        for r, p in sorted(self.atoms):
            segs.append((p, r, r))
        for a, b, d in sorted(self.density_pieces):
            if d > 0:
                segs.append((d * (b - a), a, b))
        masses = np.array([s[0] for s in segs])
        return np.cumsum(masses), segs

    def sample_radius(self, rng, size=None):
        """i.i.d. radii via inverse CDF; one uniform draw per sample."""
        cum, segs = self._segments()
        u = rng.random(size if size is not None else 1)
        idx = np.minimum(np.searchsorted(cum, u, side="right"), len(segs) - 1)
        lo_mass = np.concatenate([[0.0], cum])[idx]
        out = np.empty_like(u)
        for k, (mass, a, b) in enumerate(segs):
            m = idx == k
            if not np.any(m):
                continue
            if a == b:
                out[m] = a
            else:
                out[m] = a + (b - a) * (u[m] - lo_mass[m]) / mass
        return out if size is not None else float(out[0])

    def dies(self, x, radius):
        """Membership in the open hole (x0 - w, x0 + w)."""
        return np.abs(np.asarray(x) - self.center) < np.asarray(radius)


def _clip_interval(lo, hi):
    lo, hi = max(lo, 0.0), min(hi, 1.0)
    return [] if hi <= lo else [(lo, hi)]


# -- Ahlfors regularity and the Hoelder criterion --------------------------

@dataclass
class AhlforsReport:
    regular: bool
    alpha: float
    constant: float = np.inf
    witness: str = ""


def ahlfors_check(noise, alpha=1.0, interval_grid=512):
    """Upper semi-regularity of the radius law over open intervals of (0, oo).

    The atom at radius 0 lies in no open interval of (0, oo) and is exempt.
    For alpha = 1 the supremum is the maximal density value (exact); for
    alpha < 1 it is estimated on a breakpoint-refined endpoint grid.
    Any atom at a positive radius is an exact violation.
    """
    if not 0 < alpha <= 1:
        # intervals shrinking inside a density piece drive the ratio up
        if any(d > 0 for _, _, d in noise.density_pieces) or noise.jump_radii:
            return AhlforsReport(False, alpha, witness="alpha > 1 is violated "
                                 "by any non-degenerate law")
        return AhlforsReport(True, alpha, constant=0.0)
    if noise.jump_radii:
        r = noise.jump_radii[0]
        return AhlforsReport(
            False, alpha,
            witness=f"atom at radius {r}: open intervals shrinking around it "
            "make theta(I)/|I|^alpha unbounded",
        )
    densities = [d for _, _, d in noise.density_pieces if d > 0]
    if not densities:
        return AhlforsReport(True, alpha, constant=0.0)
    if alpha == 1.0:
        return AhlforsReport(True, alpha, constant=max(densities))
    # alpha < 1: grid supremum over interval endpoints
    pts = {a for a, _, _ in noise.density_pieces} | {b for _, b, _ in noise.density_pieces}
    lo, hi = min(pts), max(pts)
    grid = np.unique(np.concatenate(
        [np.linspace(lo, hi, interval_grid), np.array(sorted(pts))]
    ))
    cdf = noise.cdf(grid)
    du = grid[None, :] - grid[:, None]
    dm = cdf[None, :] - cdf[:, None]
    mask = du > 0
    k = float(np.max(dm[mask] / du[mask] ** alpha))
    return AhlforsReport(True, alpha, constant=k)


@dataclass
class HolderReport:
    g_holder: bool
    g_seminorm_estimate: float
    ahlfors_constant: float
    psi_holder: bool


def holder_check_g(noise, alpha=1.0, grid=512):
    """Grid seminorm of g checked against the Ahlfors constant; psi is
    Hoelder iff additionally theta({0}) > 0."""
    reg = ahlfors_check(noise, alpha)
    g = noise.survival_function()
    xs = np.unique(np.concatenate(
        [np.linspace(0.0, 1.0, grid), noise.g_breakpoints()]
    ))
    ys = g(xs)
    dx = np.abs(xs[:, None] - xs[None, :])
    dy = np.abs(ys[:, None] - ys[None, :])
    mask = dx > 0
    c_est = float(np.max(dy[mask] / dx[mask] ** alpha)) if np.any(mask) else 0.0
    return HolderReport(
        g_holder=reg.regular,
        g_seminorm_estimate=c_est,
        ahlfors_constant=reg.constant,
        psi_holder=reg.regular and noise.mass_at_zero > 0.0,
    )


# -- discrete Markov-cylinder holes ----------------------------------------

@dataclass(frozen=True)
class DiscreteHoleModel:
    """K holes, each a union of level-`level` cylinders of the map, chosen
    i.i.d. with probabilities summing to 1; an empty hole is allowed and
    plays the role of the no-hole event."""

    level: int
    holes: tuple  # ((words, prob), ...) with words a tuple of symbol tuples

    def __post_init__(self):
        object.__setattr__(
            self,
            "holes",
            tuple(
                (tuple(tuple(w) for w in words), float(p))
                for words, p in self.holes
            ),
        )
        if abs(sum(p for _, p in self.holes) - 1.0) > MASS_TOL:
            raise ValueError("hole probabilities must sum to 1")
        if any(p <= 0 for _, p in self.holes):
            raise ValueError("hole probabilities must be positive")

    @property
    def no_hole_mass(self):
        return sum(p for words, p in self.holes if not words)

    def _cylinders(self, markov_map):
        cyls = {c.symbols: c for c in markov_map.refine(self.level)}
        for words, _ in self.holes:
            for w in words:
                if w not in cyls:
                    raise ValueError(f"hole word {w} is not an admissible "
                                     f"level-{self.level} cylinder")
        return cyls

    def weight_values(self, markov_map):
        """(breakpoints, values) of g = sum_i p_i 1_{complement of H_i}."""
        cyls = self._cylinders(markov_map)
        level = sorted(cyls.values(), key=lambda c: c.lo)
        breaks = np.array([c.lo for c in level] + [1.0])
        vals = np.zeros(len(level))
        for k, c in enumerate(level):
            vals[k] = sum(
                p for words, p in self.holes if c.symbols not in words
            )
        return breaks, vals

    def survival_function(self, markov_map):
        breaks, vals = self.weight_values(markov_map)
        return piecewise_constant(breaks, vals, pieces=breaks)

    def psi(self, markov_map):
        breaks, vals = self.weight_values(markov_map)
        if np.any(vals <= 0.0):
            raise ValueError(
                "psi unbounded: some cylinder is covered by every hole; "
                "use the survival weight g directly (weight mode)"
            )
        return piecewise_constant(breaks, np.log(vals), pieces=breaks)

    def max_hole(self, markov_map):
        """Open intervals where g < 1."""
        breaks, vals = self.weight_values(markov_map)
        return _runs(breaks, vals < 1.0 - MASS_TOL)

    def certain_hole(self, markov_map):
        """Open intervals where g = 0."""
        breaks, vals = self.weight_values(markov_map)
        return _runs(breaks, vals <= MASS_TOL)

    sampler_id = "philox4x64/categorical-v1"

    def sample_hole_index(self, rng, size=None):
        probs = np.cumsum([p for _, p in self.holes])
        u = rng.random(size if size is not None else 1)
        idx = np.minimum(np.searchsorted(probs, u, side="right"),
                         len(self.holes) - 1)
        return idx if size is not None else int(idx[0])

    def hole_membership_tables(self, markov_map):
        """Per-hole sorted interval bounds for vectorized membership tests."""
        cyls = self._cylinders(markov_map)
        tables = []
        for words, _ in self.holes:
            ivs = sorted((cyls[w].lo, cyls[w].hi) for w in words)
            flat = np.array([v for iv in ivs for v in iv])
            tables.append(flat)
        return tables


def _runs(breaks, flags):
    """Merge consecutive flagged pieces into open intervals."""
    out = []
    start = None
    for k, f in enumerate(flags):
        if f and start is None:
            start = breaks[k]
        if not f and start is not None:
            out.append((start, breaks[k]))
            start = None
    if start is not None:
        out.append((start, breaks[-1]))
    return out
