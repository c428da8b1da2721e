"""Experiment configuration: YAML files, dotted overrides and validation."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from ckrr.errors import ConfigError

__all__ = ["ExperimentConfig", "ThermoConfig", "RiskConfig", "load_config", "apply_overrides", "SWEEP_AXES"]

# config key holding the grid for each sweepable axis
SWEEP_AXES = {"k": "k_grid", "lambda": "lam_grid", "n": "n_grid", "sigma2": "sigma2_grid"}

BASIS_RECIPES = ("fourier_pairs", "nystrom", "gaussian_field", "random_feature", "relu_units")


def _default_terms():
    # sum_{n <= 5} n cos(n x)
    return [[n, float(n), 0.0] for n in range(6)]


@dataclass
class ExperimentConfig:
    kernel: dict = field(default_factory=lambda: {"variant": "fourier_series", "s": 1.0, "J": 300})
    basis: dict = field(default_factory=lambda: {"recipe": "fourier_pairs"})
    solver: str = "krr"
    penalized: dict = field(default_factory=lambda: {"activation": "cos", "m": 1000, "omega_scale": 1.0})
    target: dict = field(default_factory=lambda: {"type": "fourier", "terms": _default_terms()})
    k: int = 0
    k_grid: list | None = None
    k_list: list = field(default_factory=lambda: [0, 5])
    lam: float = 0.01
    lam_grid: list | None = None
    n: int = 100
    n_grid: list | None = None
    sigma2: float = 0.25
    sigma2_grid: list | None = None
    reps: int = 20
    test_size: int = 1000
    seed: int = 0
    cv_folds: int = 0
    standardize: str = "none"
    threads: int = 1
    outputs: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict[str, Any] | None) -> "ExperimentConfig":
        return _from_mapping(cls, data)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self)}

    # ------------------------------------------------------------------ checks

    def swept_axes(self) -> list[str]:
        return [axis for axis, key in SWEEP_AXES.items() if getattr(self, key) is not None]

    def require_axis(self, allowed) -> str:
        """The single swept axis, which must be one of ``allowed``."""
        axes = self.swept_axes()
        if len(axes) != 1:
            raise ConfigError(f"exactly one swept axis per run is required, found {axes or 'none'}")
        if axes[0] not in allowed:
            raise ConfigError(f"axis {axes[0]!r} is not sweepable here; allowed: {sorted(allowed)}")
        return axes[0]

    def grid(self, axis: str) -> list:
        values = getattr(self, SWEEP_AXES[axis])
        if not values:
            raise ConfigError(f"{SWEEP_AXES[axis]} is empty")
        return sorted(values)

    def target_type(self) -> str:
        return self.target.get("type", "fourier")

    def fourier_terms(self) -> list:
        """``[(n, a_n, b_n), ...]`` for a fourier-family target."""
        t = self.target
        kind = self.target_type()
        if kind == "zero":
            return []
        if kind != "fourier":
            raise ConfigError(f"target type {kind!r} is not a fourier target")
        if "preset" in t:
            if t["preset"] != "n_cos":
                raise ConfigError(f"unknown fourier preset {t['preset']!r}")
            return [(n, float(n), 0.0) for n in range(int(t.get("n_max", 5)) + 1)]
        terms = []
        for term in t.get("terms", []):
            if len(term) != 3:
                raise ConfigError(f"fourier terms are [n, a_n, b_n], got {term!r}")
            n, a_n, b_n = term
            if int(n) != n or n < 0:
                raise ConfigError(f"harmonic index must be a nonnegative integer, got {n!r}")
            terms.append((int(n), float(a_n), float(b_n)))
        return terms

    def validate(self) -> None:
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if self.test_size < 1:
            raise ConfigError(f"test_size must be >= 1, got {self.test_size}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if self.solver not in ("krr", "rfrr"):
            raise ConfigError(f"solver must be 'krr' or 'rfrr', got {self.solver!r}")
        recipe = self.basis.get("recipe")
        if recipe not in BASIS_RECIPES:
            raise ConfigError(f"unknown basis recipe {recipe!r}; known: {list(BASIS_RECIPES)}")
        if self.target_type() not in ("fourier", "zero", "sphere", "csv"):
            raise ConfigError(f"unknown target type {self.target_type()!r}")
        if self.target_type() == "csv" and self.cv_folds < 2:
            raise ConfigError("csv targets are evaluated by cross-validation; set cv_folds >= 2")
        if self.standardize not in ("none", "per_feature", "global"):
            raise ConfigError(f"standardize must be none, per_feature or global, got {self.standardize!r}")
        for name in ("lam", "n", "sigma2", "k"):
            grid = getattr(self, SWEEP_AXES["lambda" if name == "lam" else name])
            values = list(grid) if grid is not None else [getattr(self, name)]
            for v in values:
                if name == "lam" and not float(v) > 0:
                    raise ConfigError(f"ridge values must be positive, got {v!r}")
                if name == "n" and int(v) < 1:
                    raise ConfigError(f"N must be >= 1, got {v!r}")
                if name == "sigma2" and float(v) < 0:
                    raise ConfigError(f"sigma2 must be >= 0, got {v!r}")
                if name == "k" and int(v) < 0:
                    raise ConfigError(f"k must be >= 0, got {v!r}")
        if any(int(k) < 0 for k in self.k_list):
            raise ConfigError(f"k_list entries must be >= 0, got {self.k_list}")


# --------------------------------------------------------------------------- loading


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``key.sub=value`` strings; values are parsed as YAML scalars/lists."""
    data = copy.deepcopy(data)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        if not all(parts):
            raise ConfigError(f"bad override key {key!r}")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse override value {raw!r}: {exc}") from None
        node = data
        for p in parts[:-1]:
            child = node.get(p)
            if child is None:
                child = node[p] = {}
            if not isinstance(child, dict):
                raise ConfigError(f"override {key!r}: {p!r} is not a mapping")
            node = child
        node[parts[-1]] = value
    return data


def load_config(path=None, overrides=None, defaults=None) -> dict:
    """Raw config mapping: ``defaults``, then the YAML file, then overrides.

    File keys replace default keys whole (a file ``kernel`` mapping is not
    merged into the default kernel); dotted overrides patch the result.
    """
    data: dict = copy.deepcopy(defaults) if defaults else {}
    if path is not None:
        path = Path(path)
        try:
            loaded = yaml.safe_load(path.read_text())
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from None
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        data.update(loaded)
    return apply_overrides(data, overrides)


def _from_mapping(cls, data):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        cfg = cls(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


@dataclass
class ThermoConfig:
    """Monte-Carlo estimate of the residual-kernel eigenvalue ratios."""

    spectrum: dict = field(default_factory=lambda: {"tag": "power", "a": 2.0, "J": 4000})
    k: int = 100
    trials: int = 50
    i_max: int = 400
    seed: int = 0
    threads: int = 1
    outputs: dict = field(default_factory=dict)

    from_dict = classmethod(_from_mapping)

    def validate(self) -> None:
        if self.k < 1 or self.trials < 2 or self.i_max < 1 or self.threads < 1:
            raise ConfigError("need k >= 1, trials >= 2, i_max >= 1 and threads >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")


@dataclass
class RiskConfig:
    """Omniscient risk prediction and the unpenalization advantage check.

    ``k`` counts leading eigenmodes; for the fourier spectrum the first ``h``
    harmonic pairs plus the constant are ``k = 2h + 1`` modes. ``target`` is
    ``{"type": "fourier", "terms": [[n, a_n, b_n], ...]}`` (fourier spectrum
    only) or ``{"type": "coefficients", "u": [...]}``.
    """

    spectrum: dict = field(default_factory=lambda: {"tag": "fourier", "s": 1.0, "harmonics": 300})
    target: dict = field(default_factory=lambda: {"type": "fourier", "terms": _default_terms()})
    n: int = 100
    lam: float = 0.01
    sigma2: float = 0.25
    k: int = 11
    c_user: float = 1.0
    outputs: dict = field(default_factory=dict)

    from_dict = classmethod(_from_mapping)

    def validate(self) -> None:
        if self.n < 1 or self.k < 1:
            raise ConfigError(f"need n >= 1 and k >= 1, got n={self.n}, k={self.k}")
        if not float(self.lam) >= 0 or not float(self.sigma2) >= 0:
            raise ConfigError("lam and sigma2 must be >= 0")
        if self.target.get("type") not in ("fourier", "coefficients"):
            raise ConfigError(f"unknown risk target type {self.target.get('type')!r}")
