"""Monte Carlo statistics of the random open system.

The survival time tau of a point x under a hole path (w_1, w_2, ...) is
the largest n such that T^k x escapes the hole at every time k = 1..n;
the point is not tested at time 0.  Started from the conditionally
stationary law, tau is geometric with ratio lambda-hat, so the mean is
lam/(1-lam), the variance lam/(1-lam)^2 and the dispersion 1/(1-lam).

Samples are partitioned into fixed-size blocks; block i draws from a
Philox stream spawned as SeedSequence(seed, spawn_key=(i,)), so results
are bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .noise import DiscreteHoleModel, NoiseModel

DEFAULT_TAU_MAX = 10_000
DEFAULT_BLOCK = 1 << 16
OVERFLOW_WARN_FRACTION = 0.01


@dataclass(frozen=True)
class LebesgueLaw:
    label = "lebesgue"

    def sample(self, rng, size):
        return rng.random(size)


@dataclass(frozen=True)
class PointLaw:
    x: float
    label = "point"

    def sample(self, rng, size):
        return np.full(size, float(self.x))


def initial_law(spec_or_name):
    """Coerce 'lebesgue', ('point', x) or a conditionally stationary
    measure (anything with .sample) into a sampling law."""
    if spec_or_name == "lebesgue":
        return LebesgueLaw()
    if isinstance(spec_or_name, tuple) and spec_or_name[0] == "point":
        return PointLaw(spec_or_name[1])
    if hasattr(spec_or_name, "sample"):
        return spec_or_name
    raise ValueError(f"unknown initial law {spec_or_name!r}")


@dataclass
class SurvivalRun:
    seed: int
    sampler_id: str
    n_samples: int
    initial_law: str
    tau_max: int
    counts: np.ndarray             # counts[t] = #{tau = t}, t < tau_max
    overflow: int                  # #{tau >= tau_max}
    mean: float = 0.0
    variance: float = 0.0
    se_mean: float = 0.0
    se_variance: float = 0.0
    overflow_warning: bool = False
    moments: dict = field(default_factory=dict)

    def __post_init__(self):
        assert int(np.sum(self.counts)) + self.overflow == self.n_samples
        taus = np.arange(len(self.counts), dtype=float)
        weights = self.counts.astype(float)
        n = float(self.n_samples)
        # overflow entries enter at tau_max: a lower bound on the moments
        total_tau = float(taus @ weights) + self.overflow * self.tau_max
        mean = total_tau / n
        dev = taus - mean
        m2 = float(dev**2 @ weights) + self.overflow * (self.tau_max - mean) ** 2
        m3 = float(dev**3 @ weights) + self.overflow * (self.tau_max - mean) ** 3
        m4 = float(dev**4 @ weights) + self.overflow * (self.tau_max - mean) ** 4
        m2, m3, m4 = m2 / n, m3 / n, m4 / n
        self.mean = mean
        self.variance = m2
        self.se_mean = math.sqrt(m2 / n)
        self.se_variance = math.sqrt(max(m4 - m2**2, 0.0) / n)
        self.overflow_warning = self.overflow > OVERFLOW_WARN_FRACTION * n
        self.moments = {"m2": m2, "m3": m3, "m4": m4}

    def alive_fraction(self, n):
        """P(tau >= n) estimate; the overflow bucket counts as alive."""
        if n <= 0:
            return 1.0
        dead = int(np.sum(self.counts[: min(n, len(self.counts))]))
        return (self.n_samples - dead) / self.n_samples

    def survival_curve(self, horizon):
        return np.array([self.alive_fraction(n) for n in range(horizon + 1)])


def _block_stream(seed, block_index):
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block_index,)))
    )


def _hole_tester(markov_map, noise):
    if isinstance(noise, NoiseModel):
        center = noise.center

        def step(rng, x):
            radii = noise.sample_radius(rng, x.size)
            return np.abs(x - center) < radii

        return step
    if isinstance(noise, DiscreteHoleModel):
        tables = noise.hole_membership_tables(markov_map)

        def step(rng, x):
            idx = noise.sample_hole_index(rng, x.size)
            dead = np.zeros(x.size, dtype=bool)
            for k, flat in enumerate(tables):
                m = idx == k
                if flat.size == 0 or not np.any(m):
                    continue
                # odd insertion position = inside one of the hole intervals
                dead[m] = np.searchsorted(flat, x[m], side="right") % 2 == 1
            return dead

        return step
    raise TypeError(f"unsupported noise model {type(noise)!r}")


def _simulate_block(markov_map, step, law, seed, block_index, size, tau_max):
    rng = _block_stream(seed, block_index)
    x = np.asarray(law.sample(rng, size), dtype=float)
    tau = np.full(size, tau_max, dtype=np.int64)
    alive = np.arange(size)
    for k in range(1, tau_max + 1):
        x = np.atleast_1d(markov_map.apply(x))
        dead = step(rng, x)
        if np.any(dead):
            tau[alive[dead]] = k - 1
            keep = ~dead
            x, alive = x[keep], alive[keep]
            if alive.size == 0:
                break
    counts = np.bincount(tau[tau < tau_max], minlength=tau_max)
    return counts, int(np.sum(tau >= tau_max))


def simulate_tau(markov_map, noise, law, n_samples, seed,
                 tau_max=DEFAULT_TAU_MAX, workers=1, block_size=DEFAULT_BLOCK):
    """Histogram of survival times over n_samples seeded trajectories.

    The block partition is fixed by block_size alone, so any worker count
    reproduces the same counts bit for bit.
    """
    law = initial_law(law)
    step = _hole_tester(markov_map, noise)
    blocks = [
        (i, min(block_size, n_samples - i * block_size))
        for i in range((n_samples + block_size - 1) // block_size)
    ]

    def run(args):
        i, size = args
        return _simulate_block(markov_map, step, law, seed, i, size, tau_max)

    if workers <= 1:
        results = [run(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, blocks))

    counts = np.zeros(tau_max, dtype=np.int64)
    overflow = 0
    for c, o in results:
        counts += c
        overflow += o
    sampler = getattr(noise, "sampler_id", "philox4x64")
    return SurvivalRun(seed, sampler, n_samples, getattr(law, "label", "custom"),
                       tau_max, counts, overflow)


def survival_curve(markov_map, noise, law, n_samples, seed, horizon,
                   workers=1, run=None):
    """Alive fractions at times 0..horizon (geometric with ratio
    lambda-hat under the conditionally stationary initial law)."""
    if horizon < 2:
        raise ValueError("horizon must be >= 2")
    if run is None:
        run = simulate_tau(markov_map, noise, law, n_samples, seed,
                           tau_max=max(horizon, DEFAULT_TAU_MAX),
                           workers=workers)
    return run.survival_curve(horizon), run


def fit_log_slope(curve, n_lo=1, n_hi=None):
    """Least-squares slope of log(alive fraction) over n = n_lo..n_hi."""
    curve = np.asarray(curve, dtype=float)
    if n_hi is None:
        n_hi = len(curve) - 1
    ns = np.arange(n_lo, n_hi + 1)
    vals = curve[ns]
    if np.any(vals <= 0):
        raise ValueError("survival curve hits zero on the fit range")
    return float(np.polyfit(ns, np.log(vals), 1)[0])


def index_of_dispersion(run):
    """variance/mean with a delta-method standard error; the theoretical
    value under the stationary law is 1/(1 - lambda-hat)."""
    if run.mean <= 0:
        raise ValueError("index of dispersion undefined: mean is zero")
    n = run.n_samples
    mu, v = run.mean, run.variance
    m3, m4 = run.moments["m3"], run.moments["m4"]
    var_mean = v / n
    var_var = max(m4 - v**2, 0.0) / n
    cov = m3 / n
    d_mu = -v / mu**2
    d_v = 1.0 / mu
    se = math.sqrt(max(d_mu**2 * var_mean + d_v**2 * var_var
                       + 2.0 * d_mu * d_v * cov, 0.0))
    return v / mu, se
