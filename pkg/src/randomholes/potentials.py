"""Locally Hoelder weight exponents for transfer operators.

A Potential wraps a vectorized evaluator on [0, 1] together with the
partition pieces on which Hoelder continuity is asserted, the exponent,
and (when known) a seminorm bound.  Piecewise-constant potentials keep
their breakpoints so operator assembly can detect exact mode.
"""

from __future__ import annotations

import numpy as np


class Potential:
    def __init__(self, fn, alpha=1.0, pieces=None, seminorm=None,
                 breakpoints=None, values=None):
        self._fn = fn
        self.alpha = float(alpha)
        self.pieces = (
            np.array([0.0, 1.0]) if pieces is None else np.asarray(pieces, dtype=float)
        )
        self.seminorm = seminorm
        # breakpoints/values set only for piecewise-constant potentials
        self.breakpoints = (
            None if breakpoints is None else np.asarray(breakpoints, dtype=float)
        )
        self.values = None if values is None else np.asarray(values, dtype=float)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        out = np.asarray(self._fn(np.atleast_1d(x)), dtype=float)
        return float(out[0]) if scalar else out

    @property
    def is_piecewise_constant(self):
        return self.values is not None

    @property
    def interior_breakpoints(self):
        """Discontinuity locations in (0, 1), empty for smooth potentials."""
        if self.breakpoints is None:
            return np.array([])
        b = self.breakpoints
        return b[(b > 0.0) & (b < 1.0)]

    def __add__(self, other):
        return combine(1.0, self, 1.0, other)

    def __rmul__(self, a):
        return scale(a, self)


def piecewise_constant(breakpoints, values, alpha=1.0, pieces=None):
    """Potential constant on each [b_k, b_{k+1}) (right-open, b spanning [0,1])."""
    breaks = np.asarray(breakpoints, dtype=float)
    vals = np.asarray(values, dtype=float)
    if len(vals) != len(breaks) - 1:
        raise ValueError("need one value per piece")
    inner = breaks[1:-1]

    def fn(x):
        return vals[np.searchsorted(inner, x, side="right")]

    return Potential(
        fn,
        alpha=alpha,
        pieces=breaks if pieces is None else pieces,
        seminorm=0.0,
        breakpoints=breaks,
        values=vals,
    )


def constant(c):
    return piecewise_constant([0.0, 1.0], [float(c)])


def geometric_potential(markov_map):
    """x -> -log|T'(x)|; piecewise-constant for affine maps."""
    if markov_map.is_affine:
        vals = [-np.log(abs(b.slope)) for b in markov_map.branches]
        return piecewise_constant(markov_map.endpoints, vals)

    def fn(x):
        return -np.log(np.abs(markov_map.derivative(x)))

    return Potential(fn, alpha=markov_map.holder_exponent,
                     pieces=markov_map.endpoints)


def from_grid(xs, ys, alpha=1.0, pieces=None):
    """Grid-sampled potential, piecewise-linear interpolation inside pieces."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    order = np.argsort(xs)
    xs, ys = xs[order], ys[order]

    def fn(x):
        return np.interp(x, xs, ys)

    return Potential(fn, alpha=alpha, pieces=pieces)


def scale(a, phi):
    return combine(a, phi, 0.0, constant(0.0))


def combine(a, phi, b, psi):
    """a*phi + b*psi on the common refinement of the base partitions."""
    pieces = np.unique(np.concatenate([phi.pieces, psi.pieces]))
    seminorm = None
    if phi.seminorm is not None and psi.seminorm is not None:
        seminorm = abs(a) * phi.seminorm + abs(b) * psi.seminorm
    if phi.is_piecewise_constant and psi.is_piecewise_constant:
        breaks = np.unique(np.concatenate([phi.breakpoints, psi.breakpoints]))
        mids = 0.5 * (breaks[:-1] + breaks[1:])
        vals = a * phi(mids) + b * psi(mids)
        return piecewise_constant(breaks, vals, alpha=min(phi.alpha, psi.alpha),
                                  pieces=pieces)

    def fn(x):
        return a * phi(x) + b * psi(x)

    return Potential(fn, alpha=min(phi.alpha, psi.alpha), pieces=pieces,
                     seminorm=seminorm)


def birkhoff_sum(phi, markov_map, x, n):
    """sum_{k<n} phi(T^k x); the empty sum is 0."""
    if n < 0:
        raise ValueError("n must be >= 0")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    y = np.atleast_1d(x).astype(float)
    total = np.zeros_like(y)
    for _ in range(n):
        total += phi(y)
        y = np.atleast_1d(markov_map.apply(y))
    return float(total[0]) if scalar else total


def estimate_seminorm(phi, grid_size=64):
    """Max Hoelder quotient over grid pairs inside each base piece.

    Uses the dyadic grid lo + (hi-lo)*j/2^m with 2^m >= grid_size and the
    right endpoint excluded (pieces are right-open), so grids are nested
    and the estimate is monotone non-decreasing in grid_size.  A lower
    bound on the true seminorm; exact (0) for piecewise-constant
    potentials whose breakpoints are piece boundaries.  Raises if the
    potential is not finite on the grid.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    m = int(np.ceil(np.log2(grid_size)))
    npts = 2**m
    best = 0.0
    for lo, hi in zip(phi.pieces[:-1], phi.pieces[1:]):
        xs = lo + (hi - lo) * np.arange(npts) / npts
        ys = phi(xs)
        if not np.all(np.isfinite(ys)):
            raise ValueError(
                "potential not finite on grid: not locally Hoelder on "
                f"[{lo:.6g}, {hi:.6g})"
            )
        for start in range(0, npts, 256):
            xc = xs[start : start + 256]
            yc = ys[start : start + 256]
            dx = np.abs(xc[:, None] - xs[None, :])
            dy = np.abs(yc[:, None] - ys[None, :])
            mask = dx > 0
            if np.any(mask):
                q = dy[mask] / dx[mask] ** phi.alpha
                best = max(best, float(np.max(q)))
    return best
