"""Thermodynamic formalism on top of the finite-state transfer operator.

Pressure is the log of the dominant eigenvalue; the equilibrium measure
is realized as a Markov chain on cylinders (stochasticized operator
matrix), which makes Gibbs ratios, entropy and cylinder bounds exact for
piecewise-constant data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import survival as survival_mod
from .noise import DiscreteHoleModel
from .potentials import Potential, birkhoff_sum, combine, constant, piecewise_constant
from .transfer import (
    _power_iteration,
    assemble,
    dominant_spectrum,
    equilibrium_measure,
    weight_potential,
)


def dominant_eigenvalue(op, tol=1e-14, maxit=50000):
    """Function-side power iteration only (no eigenvectors, no gap)."""
    lam, _, _, _ = _power_iteration(op.matrix.T.tocsr(), tol, maxit)
    return lam


def pressure(markov_map, potential, n, weight=None, tol=1e-14):
    """log of the dominant eigenvalue at level n; exact in exact mode."""
    op = assemble(markov_map, potential, n, weight=weight)
    return math.log(dominant_eigenvalue(op, tol=tol))


# -- Markov measure on cylinders --------------------------------------------

@dataclass
class CylinderMeasure:
    """Stationary Markov measure mu(w) = q_{w_0} Q_{w_0 w_1} ... on first
    digit cylinders; states with zero eigenmeasure mass are dead and all
    words through them carry exactly zero measure."""

    level: int
    words: list
    intervals: np.ndarray
    q: np.ndarray                  # stationary vector, zero on dead states
    Q: np.ndarray                  # stochastic on live states, rows of dead
                                   # states are zero
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {w: k for k, w in enumerate(self.words)}

    @property
    def live(self):
        return self.q > 0.0

    def measure_of_word(self, word):
        word = tuple(word)
        n, L = len(word), self.level
        if n < L:
            return float(sum(self.q[k] for w, k in self.index.items()
                             if w[:n] == word))
        first = self.index.get(word[:L])
        if first is None:
            return 0.0
        mass = self.q[first]
        prev = first
        for k in range(1, n - L + 1):
            cur = self.index.get(word[k : k + L])
            if cur is None:
                return 0.0
            mass *= self.Q[prev, cur]
            prev = cur
        return float(mass)

    def entropy(self):
        """-sum q_i Q_ij log Q_ij (0 log 0 = 0)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(self.Q > 0, self.Q * np.log(self.Q), 0.0)
        return float(-self.q @ np.sum(terms, axis=1))

    def integrate(self, potential):
        mids = 0.5 * (self.intervals[:, 0] + self.intervals[:, 1])
        vals = potential(mids)
        return float(np.sum(np.where(self.q > 0, self.q * vals, 0.0)))


def markov_measure(spec):
    """Chain Q_ij = A_ij * nu_j / (lam * nu_i) on live states, stationary
    vector q_i = rho_i * nu_i (normalized)."""
    op = spec.matrix
    lam = spec.eigenvalue
    if spec.gap >= lam * (1.0 - 1e-9):
        raise ValueError("dominant eigenvalue is not simple: no Markov chain")
    nu, rho = spec.nu, spec.rho
    m = op.n_states
    dense = op.matrix.toarray()
    Q = np.zeros((m, m))
    live = nu > 0.0
    for i in np.flatnonzero(live):
        Q[i, live] = dense[i, live] * nu[live] / (lam * nu[i])
    q = rho * nu
    q = q / float(np.sum(q))
    return CylinderMeasure(op.level, op.words, op.intervals, q, Q)


def cylinder_bounds_check(measure, markov_map, n_max, lower_base, upper_base,
                          rel_tol=1e-12):
    """Verify lower^n <= mu(w) <= upper^n on every admissible word of
    length n <= n_max; returns (ok, worst violation description)."""
    worst = (True, "")
    for n in range(1, n_max + 1):
        lo, hi = lower_base**n, upper_base**n
        for c in markov_map.refine(n):
            mass = measure.measure_of_word(c.symbols)
            if mass < lo * (1 - rel_tol) - 1e-300 or mass > hi * (1 + rel_tol):
                return False, (f"word {c.symbols}: mass {mass} outside "
                               f"[{lo}, {hi}]")
    return worst


@dataclass
class GibbsReport:
    constants: dict                # n -> C_n
    violations: list

    @property
    def constant(self):
        return max(self.constants.values()) if self.constants else math.inf

    @property
    def ok(self):
        return not self.violations


def gibbs_check(measure, markov_map, potential, n_max, weight=None):
    """Comparability constant of mu(w) against normalized Birkhoff weights
    e^{S_n phi} (times the survival product when a weight is given)."""
    constants = {}
    violations = []
    for n in range(1, n_max + 1):
        cylinders = markov_map.refine(n)
        weights = np.empty(len(cylinders))
        for k, c in enumerate(cylinders):
            w = math.exp(birkhoff_sum(potential, markov_map, c.midpoint, n))
            if weight is not None:
                x = c.midpoint
                for _ in range(n):
                    w *= float(weight(x))
                    x = markov_map.apply(x)
            weights[k] = w
        z = float(np.sum(weights))
        c_n = 1.0
        for k, c in enumerate(cylinders):
            mass = measure.measure_of_word(c.symbols)
            norm_w = weights[k] / z
            if norm_w == 0.0 and mass == 0.0:
                continue
            if norm_w == 0.0 or mass == 0.0:
                violations.append((c.symbols, mass, norm_w))
                continue
            ratio = mass / norm_w
            c_n = max(c_n, ratio, 1.0 / ratio)
        constants[n] = float(c_n)
    return GibbsReport(constants, violations)


# -- pressure equation T(t) and the dimension spectrum -----------------------

def solve_T(markov_map, phi, psi, t, level=1, tol=1e-12, bracket=(-1.0, 1.0),
            max_expand=60):
    """Root s = T(t) of pressure(t*phi + s*psi) = 0 by bisection.

    pressure is strictly decreasing in s when psi <= 0 with psi < 0
    somewhere dynamically relevant.
    """
    mids_probe = np.linspace(0.0, 1.0, 129)
    if float(np.max(np.abs(psi(mids_probe)))) < 1e-15:
        raise ValueError("T(t) undefined: pressure does not depend on s "
                         "(psi is identically zero)")

    def p_of(s):
        pot = combine(t, phi, s, psi)
        return pressure(markov_map, pot, level)

    lo, hi = bracket
    span = hi - lo
    for _ in range(max_expand):
        if p_of(lo) > 0:
            break
        lo -= span
        span *= 2
    else:
        raise ValueError("no sign change: pressure(lo) < 0 for all probed lo")
    span = hi - lo
    for _ in range(max_expand):
        if p_of(hi) < 0:
            break
        hi += span
        span *= 2
    else:
        raise ValueError("no sign change: pressure(hi) > 0 for all probed hi")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if p_of(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class PressureCurve:
    ts: np.ndarray
    T: np.ndarray
    T_prime: np.ndarray
    dims: np.ndarray               # T(t) + t T'(t)
    residuals: np.ndarray          # |pressure(t phi + T(t) psi)|
    richardson: np.ndarray         # |T'(fd) - T'(fd/2)|


def dimension_spectrum(markov_map, phi, psi, t_grid, fd_step=1e-4, level=1,
                       tol=1e-12):
    """T(t), central-difference T'(t) (with a half-step Richardson check)
    and the dimension values T(t) + t T'(t) on a grid."""
    ts = np.asarray(t_grid, dtype=float)
    T = np.empty_like(ts)
    Tp = np.empty_like(ts)
    res = np.empty_like(ts)
    rich = np.empty_like(ts)
    for k, t in enumerate(ts):
        T[k] = solve_T(markov_map, phi, psi, t, level=level, tol=tol)
        res[k] = abs(pressure(markov_map, combine(t, phi, T[k], psi), level))

        def deriv(h):
            up = solve_T(markov_map, phi, psi, t + h, level=level, tol=tol)
            dn = solve_T(markov_map, phi, psi, t - h, level=level, tol=tol)
            return (up - dn) / (2 * h)

        Tp[k] = deriv(fd_step)
        rich[k] = abs(Tp[k] - deriv(fd_step / 2))
    return PressureCurve(ts, T, Tp, T + ts * Tp, res, rich)


# -- the psi-tilde metric and pointwise dimensions ---------------------------

@dataclass
class PsiTildeData:
    potential: Potential
    words: list
    diameters: np.ndarray
    degenerate: bool               # psi-tilde identically zero


def psi_tilde(noise, markov_map, n):
    """psi-tilde = log(g / int g dm) and the induced cylinder diameters
    exp(S_n psi-tilde) at cylinder representatives."""
    g = weight_potential(noise, markov_map)
    if isinstance(noise, DiscreteHoleModel):
        breaks, vals = noise.weight_values(markov_map)
        integral = float(np.sum(vals * np.diff(breaks)))
    else:
        integral = noise.g_integral()
    cylinders = markov_map.refine(n)
    mids = np.array([c.midpoint for c in cylinders])
    if np.any(g(mids) <= 0.0):
        raise ValueError("psi-tilde undefined: g vanishes on a cylinder")
    if g.is_piecewise_constant:
        pot = piecewise_constant(g.breakpoints, np.log(g.values) - math.log(integral),
                                 pieces=g.pieces)
    else:
        pot = Potential(lambda x: np.log(g(x)) - math.log(integral),
                        alpha=g.alpha, pieces=g.pieces)
    diams = np.array([
        math.exp(birkhoff_sum(pot, markov_map, c.midpoint, n)) for c in cylinders
    ])
    degenerate = bool(np.max(np.abs(np.log(diams))) < 1e-14)
    return PsiTildeData(pot, [c.symbols for c in cylinders], diams, degenerate)


def pointwise_dimensions(psi_data, measure):
    """d(w) = log mu(w) / log diam(w) per cylinder; NaN when degenerate."""
    if psi_data.degenerate:
        return np.full(len(psi_data.words), np.nan)
    out = np.empty(len(psi_data.words))
    for k, w in enumerate(psi_data.words):
        mass = measure.measure_of_word(w)
        out[k] = (np.log(mass) / np.log(psi_data.diameters[k])
                  if mass > 0 else np.nan)
    return out


# -- finite-t diagnostics for the equilibrium families -----------------------

@dataclass
class FamilyPoint:
    t: float
    pressure: float
    int_psi: float
    int_phi_psi: float
    entropy: float
    mass_outside: float


def family_diagnostics(markov_map, phi, noise, t_list, level=4):
    """Equilibrium family phi + t*psi via survival weights g^t.

    Reports int psi d(mu_t) (should increase to 0), the entropy from the
    variational identity, and the mu_t mass outside the never-dying node
    set (should decrease to 0).
    """
    g = weight_potential(noise, markov_map)
    max_hole, _ = survival_mod.hole_regions(noise, markov_map)
    graph = survival_mod.build_avoidance_graph(markov_map, max_hole, level)
    shield = survival_mod.surviving_nodes(graph)
    points = []
    for t in t_list:
        if g.is_piecewise_constant:
            w_t = piecewise_constant(g.breakpoints, g.values**t, pieces=g.pieces)
        else:
            w_t = Potential(lambda x, _t=t: g(x) ** _t, alpha=g.alpha,
                            pieces=g.pieces)
        op = assemble(markov_map, phi, level, weight=w_t)
        spec = dominant_spectrum(op)
        mu = equilibrium_measure(spec)
        mids = op.midpoints
        g_vals = g(mids)
        phi_vals = phi(mids)
        alive = mu > 0
        with np.errstate(divide="ignore"):
            psi_vals = np.where(g_vals > 0, np.log(np.maximum(g_vals, 1e-300)),
                                -np.inf)
        int_psi = float(np.sum(mu[alive] * psi_vals[alive]))
        int_phi_psi = float(np.sum(mu[alive] * (phi_vals + psi_vals)[alive]))
        int_pot = float(np.sum(mu[alive] * (phi_vals + t * psi_vals)[alive]))
        h = math.log(spec.eigenvalue) - int_pot
        outside = float(sum(m for w, m in zip(op.words, mu) if w not in shield))
        points.append(FamilyPoint(t, math.log(spec.eigenvalue), int_psi,
                                  int_phi_psi, h, outside))
    return points
