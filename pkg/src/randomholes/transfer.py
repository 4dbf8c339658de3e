"""Finite-state transfer operators on refined Markov partitions.

The operator with potential phi (and optional survival weight g) is
represented on level-n piecewise-constant functions by a sparse matrix
indexed [source, target]: the entry for cylinders k -> j is
exp(phi(y)) * g(y) at the representative y of the (n+1)-cylinder that
branch-maps k into j.  This matches the matrix displays of the worked
discrete-hole examples; the eigenfunction is the left eigenvector and
the eigenmeasure the right one.

When the branches are affine and all potential/weight breakpoints sit on
cylinder endpoints, the matrix is the exact action on piecewise-constant
functions (`exact` flag).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import survival as survival_mod
from .noise import DiscreteHoleModel, NoiseModel
from .potentials import combine

EXACT_TOL = 1e-12


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def weight_potential(noise, markov_map):
    """Survival function g of either noise mode as a Potential."""
    if isinstance(noise, DiscreteHoleModel):
        return noise.survival_function(markov_map)
    if isinstance(noise, NoiseModel):
        return noise.survival_function()
    raise TypeError(f"unsupported noise model {type(noise)!r}")


def psi_potential(noise, markov_map):
    if isinstance(noise, DiscreteHoleModel):
        return noise.psi(markov_map)
    if isinstance(noise, NoiseModel):
        return noise.psi()
    raise TypeError(f"unsupported noise model {type(noise)!r}")


@dataclass
class OperatorMatrix:
    level: int
    words: list
    intervals: np.ndarray          # (m, 2) cylinder endpoints
    matrix: sp.csr_matrix          # entries indexed [source, target]
    exact: bool
    markov_map: object
    potential: object
    weight: object = None
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {w: k for k, w in enumerate(self.words)}

    @property
    def n_states(self):
        return len(self.words)

    @property
    def widths(self):
        return self.intervals[:, 1] - self.intervals[:, 0]

    @property
    def midpoints(self):
        return 0.5 * (self.intervals[:, 0] + self.intervals[:, 1])

    def function_action(self, f):
        """Matrix action on piecewise-constant functions."""
        return self.matrix.T @ np.asarray(f, dtype=float)

    def measure_action(self, v):
        """Dual action on cylinder-mass vectors."""
        return self.matrix @ np.asarray(v, dtype=float)

    def entry_triplets(self):
        coo = self.matrix.tocoo()
        return zip(coo.row, coo.col, coo.data)


def _breaks_on_endpoints(pot, endpoints):
    if pot is None:
        return True
    if not pot.is_piecewise_constant:
        return False
    inner = pot.interior_breakpoints
    if inner.size == 0:
        return True
    pos = np.searchsorted(endpoints, inner)
    pos = np.clip(pos, 1, len(endpoints) - 1)
    nearest = np.minimum(
        np.abs(endpoints[pos] - inner), np.abs(endpoints[pos - 1] - inner)
    )
    return bool(np.all(nearest <= EXACT_TOL))


def assemble(markov_map, potential, n, weight=None):
    """Matrix of the (weighted) transfer operator at refinement level n."""
    if n < 1:
        raise ValueError("level must be >= 1")
    states = markov_map.refine(n)
    words = [c.symbols for c in states]
    index = {w: k for k, w in enumerate(words)}
    intervals = np.array([[c.lo, c.hi] for c in states])
    endpoints = np.unique(intervals.ravel())
    exact = (
        markov_map.is_affine
        and _breaks_on_endpoints(potential, endpoints)
        and _breaks_on_endpoints(weight, endpoints)
    )
    edges = markov_map.refine(n + 1)
    src = np.fromiter((index[e.symbols[:n]] for e in edges), dtype=int,
                      count=len(edges))
    dst = np.fromiter((index[e.symbols[1:]] for e in edges), dtype=int,
                      count=len(edges))
    reps = np.array([e.midpoint for e in edges])
    vals = np.exp(potential(reps))
    if weight is not None:
        vals = vals * weight(reps)
    m = len(words)
    matrix = sp.coo_matrix((vals, (src, dst)), shape=(m, m)).tocsr()
    return OperatorMatrix(n, words, intervals, matrix, exact,
                          markov_map, potential, weight, index)


def assemble_closed(markov_map, potential, n):
    return assemble(markov_map, potential, n)


def assemble_open(markov_map, potential, noise, n):
    """Averaged open operator: weights e^{phi(y)} g(y).

    Identical to assemble_closed with potential phi + log g when g > 0.
    """
    return assemble(markov_map, potential, n,
                    weight=weight_potential(noise, markov_map))


# -- dominant spectral data -------------------------------------------------

@dataclass
class SpectralData:
    eigenvalue: float              # lambda (closed) or lambda-hat (open)
    rho: np.ndarray                # eigenfunction, int rho dm = 1
    nu: np.ndarray                 # eigenmeasure masses, total 1
    gap: float                     # |second eigenvalue| estimate
    residual: float
    matrix: OperatorMatrix
    eigenvalue_adjoint: float = np.nan
    iterations: int = 0


def _power_iteration(mat, tol, maxit):
    m = mat.shape[0]
    v = np.full(m, 1.0 / m)
    lam = np.nan
    for it in range(1, maxit + 1):
        w = mat @ v
        new_lam = float(np.max(np.abs(w)))
        if new_lam == 0.0:
            raise ConvergenceError("operator annihilates the cone "
                                   "(zero matrix?)")
        w = w / new_lam
        if it > 1 and abs(new_lam - lam) <= tol * max(1.0, new_lam):
            resid = float(np.max(np.abs(mat @ w - new_lam * w)))
            if resid <= tol * max(1.0, new_lam):
                return new_lam, w, resid, it
        lam, v = new_lam, w
    resid = float(np.max(np.abs(mat @ v - lam * v)))
    raise ConvergenceError(
        f"power iteration did not converge in {maxit} steps "
        f"(residual {resid:.3e})", residual=resid)


def _gap_estimate(mat, lam, right, left, iters=400):
    """One Wielandt deflation step, then the growth rate of the remainder."""
    denom = float(left @ right)
    if denom == 0.0:
        return 0.0
    rng = np.random.default_rng(0)
    x = rng.standard_normal(mat.shape[0])
    x -= right * (left @ x) / denom
    growths = []
    for _ in range(iters):
        x = mat @ x - lam * right * (left @ x) / denom
        nrm = float(np.max(np.abs(x)))
        if nrm < 1e-280:
            return 0.0
        x /= nrm
        growths.append(nrm)
    tail = growths[-50:]
    return float(np.exp(np.mean(np.log(tail))))


def dominant_spectrum(op, tol=1e-12, maxit=50000):
    """Power iteration on both sides with a deflated gap estimate.

    rho is normalized to unit Lebesgue integral, nu to unit total mass.
    """
    if op.matrix.nnz == 0:
        raise ConvergenceError("zero operator matrix")
    fun_side = op.matrix.T.tocsr()
    lam, rho, resid_f, it_f = _power_iteration(fun_side, tol, maxit)
    lam_adj, nu, resid_m, it_m = _power_iteration(op.matrix.tocsr(), tol, maxit)
    scale = float(rho @ op.widths)
    if scale <= 0:
        raise ConvergenceError("eigenfunction has zero Lebesgue integral")
    rho = rho / scale
    nu = nu / float(np.sum(nu))
    gap = _gap_estimate(fun_side, lam, rho, nu)
    return SpectralData(
        eigenvalue=lam,
        rho=rho,
        nu=nu,
        gap=gap,
        residual=max(resid_f, resid_m),
        matrix=op,
        eigenvalue_adjoint=lam_adj,
        iterations=max(it_f, it_m),
    )


def equilibrium_measure(spec):
    """Cylinder masses of the equilibrium state rho * nu, normalized."""
    masses = spec.rho * spec.nu
    total = float(np.sum(masses))
    if total <= 0:
        raise ValueError("degenerate spectral data: rho*nu vanishes")
    return masses / total


def escape_rate(spec):
    """-log(lambda-hat); +inf when all mass dies in one step."""
    lam = spec.eigenvalue
    if lam == 0.0:
        return math.inf
    if not 0.0 < lam <= 1.0 + 1e-9:
        raise ValueError(
            f"escape rate needs an eigenvalue in (0, 1], got {lam}; "
            "use the geometric potential -log|T'|"
        )
    return -math.log(min(lam, 1.0))


@dataclass
class ConditionallyStationary:
    """Absolutely continuous conditionally stationary measure alpha-hat,
    stored as a piecewise-constant density over level-n cylinders."""

    density: np.ndarray
    masses: np.ndarray
    eigenvalue: float
    intervals: np.ndarray
    mass_flux: float               # int rho g dm, equals lambda-hat for
                                   # the geometric potential

    def sample(self, rng, size):
        cum = np.cumsum(self.masses)
        cum /= cum[-1]
        u = rng.random(size)
        idx = np.minimum(np.searchsorted(cum, u, side="right"),
                         len(self.masses) - 1)
        lo = self.intervals[idx, 0]
        hi = self.intervals[idx, 1]
        return lo + (hi - lo) * rng.random(size)


def conditionally_stationary(spec):
    """alpha-hat with density rho * g / lambda-hat (g = 1 when closed),
    normalized to a probability measure."""
    op = spec.matrix
    if op.weight is None:
        g_vals = np.ones(op.n_states)
    else:
        g_vals = op.weight(op.midpoints)
    density = spec.rho * g_vals / spec.eigenvalue
    masses = density * op.widths
    total = float(np.sum(masses))
    if total <= 0:
        raise ValueError("alpha-hat has zero mass")
    flux = float(spec.rho * g_vals @ op.widths)
    return ConditionallyStationary(density / total, masses / total,
                                   spec.eigenvalue, op.intervals, flux)


# -- identities and diagnostics ---------------------------------------------

def verify_reduction(markov_map, potential, noise, n, n_vectors=100, seed=0):
    """Max sup-norm discrepancy between the averaged open operator and its
    closed reductions, over random test vectors.

    Always compares against L_phi(f*g) when the data is exact; compares
    against L_{phi+psi}(f) whenever g > 0 on all cylinders.
    """
    g = weight_potential(noise, markov_map)
    open_op = assemble(markov_map, potential, n, weight=g)
    routes = []
    g_states = g(open_op.midpoints)
    if open_op.exact:
        closed_phi = assemble(markov_map, potential, n)
        routes.append(lambda f: closed_phi.function_action(f * g_states))
    if np.all(g_states > 0.0):
        if g.is_piecewise_constant:
            from .potentials import piecewise_constant
            log_g = piecewise_constant(g.breakpoints, np.log(g.values),
                                       pieces=g.pieces)
        else:
            from .potentials import Potential
            log_g = Potential(lambda x: np.log(g(x)), alpha=g.alpha,
                              pieces=g.pieces)
        closed_sum = assemble(markov_map, combine(1.0, potential, 1.0, log_g), n)
        routes.append(closed_sum.function_action)
    if not routes:
        raise ValueError("no reduction route available: weight vanishes and "
                         "the data is not exact")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_vectors):
        f = rng.uniform(-1.0, 1.0, open_op.n_states)
        lhs = open_op.function_action(f)
        for route in routes:
            worst = max(worst, float(np.max(np.abs(lhs - route(f)))))
    return worst


def conformality_check(spec):
    """Residual of the conformality identity of the eigenmeasure.

    On cylinders with positive weight: |nu(T A) - lam * e^{-phi} / g * nu(A)|
    (the potential is phi + log g - log lam).  On zero-weight cylinders the
    identity degenerates to the support statement nu(A) = 0, and |nu(A)| is
    reported.  Exact-mode matrices only.
    """
    op = spec.matrix
    if not op.exact:
        raise ValueError("conformality check requires an exact-mode matrix")
    mids = op.midpoints
    phi_vals = op.potential(mids)
    g_vals = op.weight(mids) if op.weight is not None else np.ones(op.n_states)
    tmat = op.markov_map.transition
    worst = 0.0
    for k, w in enumerate(op.words):
        shifted = w[1:]
        image_mass = 0.0
        for c in range(op.markov_map.n_cells):
            if tmat[w[-1], c]:
                target = shifted + (c,)
                j = op.index.get(target)
                if j is not None:
                    image_mass += spec.nu[j]
        if g_vals[k] > 0.0:
            expected = spec.eigenvalue * math.exp(-phi_vals[k]) / g_vals[k] * spec.nu[k]
            worst = max(worst, abs(image_mass - expected))
        else:
            worst = max(worst, abs(spec.nu[k]))
    return worst


def iterate_convergence(spec, f, n_steps):
    """Sup-norm distances of lam^{-k} L^k f from its spectral projection."""
    op = spec.matrix
    f = np.asarray(f, dtype=float)
    pairing = float(spec.rho @ spec.nu)
    if pairing == 0.0:
        raise ValueError("degenerate pairing <rho, nu> = 0")
    limit = spec.rho * float(f @ spec.nu) / pairing
    out = []
    v = f.copy()
    for _ in range(n_steps):
        v = op.function_action(v) / spec.eigenvalue
        out.append(float(np.max(np.abs(v - limit))))
    return out


@dataclass
class SupportReport:
    match: bool
    mass_support: set
    symbolic_support: set


def support_check(spec, noise, threshold_factor=1e-12):
    """Compare {cylinders with rho*nu above threshold} with the symbolic
    eventually-surviving cylinder set at the same level."""
    op = spec.matrix
    masses = equilibrium_measure(spec)
    threshold = threshold_factor / op.n_states
    mass_support = {w for w, m in zip(op.words, masses) if m > threshold}
    symbolic = survival_mod.mu_hat_support(op.markov_map, noise, op.level)
    return SupportReport(mass_support == symbolic, mass_support, symbolic)
