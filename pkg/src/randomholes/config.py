"""JSON-shaped experiment configuration.

A config declares the map, the potential, the noise (continuous or
discrete mode), the refinement level, tolerances, the seed, and the
subcommand-specific parameters.  Unknown keys are rejected with the
offending field path; a parsed config serializes back to the same
normalized dictionary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import maps, potentials
from .noise import DiscreteHoleModel, NoiseModel


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


DEFAULTS = {
    "level": 1,
    "seed": 0,
    "fd_step": 1e-4,
    "tolerances": {"spectral": 1e-12, "pressure_root": 1e-10, "mc_z": 3.0},
    "mc": {
        "samples": 100_000,
        "horizon": 20,
        "tau_max": 10_000,
        "initial_law": "alpha_hat",
        "workers": 1,
        "block_size": 65_536,
    },
    "t_grid": {"start": 0.5, "stop": 3.0, "step": 0.1},
    "survival": {"forbidden": "max-hole", "level": 4},
    "gibbs": {"n_max": 8},
}

_TOP_KEYS = {"map", "potential", "noise"} | set(DEFAULTS)
_MAP_KEYS = {
    "doubling": set(),
    "tripling": set(),
    "linear_full": {"cells"},
    "golden_mean": set(),
    "piecewise_linear": {"endpoints", "branches"},
    "perturbed_full": {"cells", "epsilon"},
}
_POTENTIAL_KEYS = {
    "geometric": set(),
    "constant": {"value"},
    "piecewise": {"breakpoints", "values"},
    "grid": {"xs", "ys"},
}


def _check_keys(d, allowed, path):
    if not isinstance(d, dict):
        raise ConfigError(path, f"expected an object, got {type(d).__name__}")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}", "unknown key")


def _merged(user, default, path):
    _check_keys(user, set(default), path)
    out = dict(default)
    out.update(user)
    return out


@dataclass
class ExperimentConfig:
    data: dict

    @classmethod
    def from_dict(cls, raw):
        _check_keys(raw, _TOP_KEYS, "config")
        data = {}
        if "map" not in raw:
            raise ConfigError("config.map", "required")
        data["map"] = cls._validate_map(raw["map"])
        data["potential"] = cls._validate_potential(
            raw.get("potential", {"kind": "geometric"})
        )
        if "noise" in raw:
            data["noise"] = cls._validate_noise(raw["noise"])
        for key in ("level", "seed", "fd_step"):
            data[key] = raw.get(key, DEFAULTS[key])
        for key in ("tolerances", "mc", "t_grid", "survival", "gibbs"):
            data[key] = _merged(raw.get(key, {}), DEFAULTS[key], f"config.{key}")
        if not isinstance(data["level"], int) or data["level"] < 1:
            raise ConfigError("config.level", "must be a positive integer")
        return cls(data)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_file(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_dict(self):
        return json.loads(json.dumps(self.data))

    def to_json(self):
        return json.dumps(self.data, indent=2, sort_keys=True)

    # -- section validators ------------------------------------------------

    @staticmethod
    def _validate_map(section):
        kind = section.get("kind") if isinstance(section, dict) else None
        if kind not in _MAP_KEYS:
            raise ConfigError("config.map.kind",
                              f"unknown map kind {kind!r}; one of {sorted(_MAP_KEYS)}")
        _check_keys(section, {"kind"} | _MAP_KEYS[kind], "config.map")
        return dict(section)

    @staticmethod
    def _validate_potential(section):
        kind = section.get("kind") if isinstance(section, dict) else None
        if kind not in _POTENTIAL_KEYS:
            raise ConfigError(
                "config.potential.kind",
                f"unknown potential kind {kind!r}; one of {sorted(_POTENTIAL_KEYS)}")
        _check_keys(section, {"kind"} | _POTENTIAL_KEYS[kind], "config.potential")
        return dict(section)

    @staticmethod
    def _validate_noise(section):
        mode = section.get("mode")
        if mode == "continuous":
            _check_keys(section, {"mode", "center", "atoms", "density_pieces"},
                        "config.noise")
            if "center" not in section:
                raise ConfigError("config.noise.center", "required")
        elif mode == "discrete":
            _check_keys(section, {"mode", "level", "holes"}, "config.noise")
            for k, hole in enumerate(section.get("holes", [])):
                _check_keys(hole, {"cells", "prob"}, f"config.noise.holes[{k}]")
        else:
            raise ConfigError("config.noise.mode",
                              f"must be 'continuous' or 'discrete', got {mode!r}")
        return dict(section)

    # -- object builders -----------------------------------------------------

    def build_map(self):
        s = self.data["map"]
        kind = s["kind"]
        if kind == "doubling":
            return maps.doubling_map()
        if kind == "tripling":
            return maps.tripling_map()
        if kind == "linear_full":
            return maps.linear_full_map(int(s["cells"]))
        if kind == "golden_mean":
            return maps.golden_mean_map()
        if kind == "piecewise_linear":
            branches = [(b["slope"], b["offset"]) for b in s["branches"]]
            return maps.piecewise_linear_map(s["endpoints"], branches)
        if kind == "perturbed_full":
            return maps.perturbed_full_map(int(s.get("cells", 2)),
                                           float(s.get("epsilon", 0.1)))
        raise ConfigError("config.map.kind", f"unhandled kind {kind!r}")

    def build_potential(self, markov_map):
        s = self.data["potential"]
        kind = s["kind"]
        if kind == "geometric":
            return potentials.geometric_potential(markov_map)
        if kind == "constant":
            return potentials.constant(float(s["value"]))
        if kind == "piecewise":
            return potentials.piecewise_constant(s["breakpoints"], s["values"])
        if kind == "grid":
            return potentials.from_grid(s["xs"], s["ys"])
        raise ConfigError("config.potential.kind", f"unhandled kind {kind!r}")

    def build_noise(self):
        s = self.data.get("noise")
        if s is None:
            return None
        if s["mode"] == "continuous":
            return NoiseModel(
                center=float(s["center"]),
                atoms=tuple((r, p) for r, p in s.get("atoms", [])),
                density_pieces=tuple(
                    (a, b, d) for a, b, d in s.get("density_pieces", [])
                ),
            )
        holes = tuple(
            (tuple(tuple(w) for w in h["cells"]), float(h["prob"]))
            for h in s["holes"]
        )
        return DiscreteHoleModel(level=int(s["level"]), holes=holes)

    @property
    def seed(self):
        return int(self.data["seed"])

    @property
    def level(self):
        return int(self.data["level"])

    @property
    def tolerances(self):
        return self.data["tolerances"]

    def t_values(self):
        g = self.data["t_grid"]
        n = int(round((g["stop"] - g["start"]) / g["step"]))
        return np.round(g["start"] + g["step"] * np.arange(n + 1), 12)


def example_config(name, p=0.5, seed=20250809, samples=1_000_000, level=1):
    """Built-in configurations reproducing the two worked examples."""
    if name == "ex1":
        noise = {
            "mode": "discrete",
            "level": 1,
            "holes": [{"cells": [[0]], "prob": 1.0 - p},
                      {"cells": [], "prob": p}],
        }
        map_spec = {"kind": "doubling"}
    elif name == "ex2":
        noise = {
            "mode": "discrete",
            "level": 1,
            "holes": [{"cells": [[0]], "prob": p},
                      {"cells": [[0], [1]], "prob": 1.0 - p}],
        }
        map_spec = {"kind": "tripling"}
    else:
        raise ConfigError("example", f"unknown example {name!r}")
    return {
        "map": map_spec,
        "potential": {"kind": "geometric"},
        "noise": noise,
        "level": level,
        "seed": seed,
        "mc": {"samples": samples, "initial_law": "alpha_hat"},
    }
