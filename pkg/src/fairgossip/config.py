"""Configuration documents and flag overrides.

The file format is a single key-value document (YAML, which subsumes JSON)
whose keys mirror SimConfig field names plus experiment-level settings;
command-line flags override file values field by field. Validation errors
name the offending field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping, Optional

from .adversary import STRATEGIES
from .engine import (
    DEFAULT_CALIBRATION,
    Calibration,
    CoalitionConfig,
    SimConfig,
    validate_config,
)
from .protocol import FAULT_STREAM_TAG, ConfigError, derive_stream

_SIM_KEYS = {"n", "gamma", "chi", "num_colors", "colors", "faulty",
             "coalition", "seed"}
_EXP_KEYS = {"trials", "sigma_mult", "max_fail_rate", "alpha", "sizes",
             "calibration"}


@dataclass(frozen=True, slots=True)
class ExperimentConfig:
    """Experiment-level knobs shared by every subcommand."""

    trials: int = 1000
    seed: int = 0
    sigma_mult: float = 4.0
    max_fail_rate: float = 0.01
    alpha: float = 0.25              # fault fraction for `faulty: random`
    sizes: tuple[int, ...] = (16, 64, 256)
    calibration: Calibration = DEFAULT_CALIBRATION


def expand_colors(spec: Any, n: int) -> tuple[int, ...]:
    """Accept an explicit list or the "16x1,16x2" shorthand.

    Shorthand items are count-by-color pairs expanded positionally by
    agent id; a bare color stands for a single agent.
    """
    if spec is None:
        return tuple((i % 2) + 1 for i in range(n))
    if isinstance(spec, (list, tuple)):
        if not all(isinstance(c, int) for c in spec):
            raise ConfigError("colors: list entries must be integers")
        return tuple(spec)
    if not isinstance(spec, str):
        raise ConfigError(f"colors: expected list or shorthand, got {spec!r}")
    out: list[int] = []
    for item in spec.split(","):
        item = item.strip()
        count, sep, color = item.rpartition("x")
        try:
            k = int(count) if sep else 1
            c = int(color)
        except ValueError:
            raise ConfigError(f"colors: bad shorthand item {item!r}") from None
        if k < 0:
            raise ConfigError(f"colors: negative count in {item!r}")
        out.extend([c] * k)
    return tuple(out)


def resolve_faulty(spec: Any, n: int, colors: tuple[int, ...],
                   seed: int, alpha: float) -> frozenset[int]:
    """Resolve a fault specification to a concrete agent set.

    Forms: explicit id list; ``random`` (an alpha fraction of agents) or
    ``random:K``, drawn once from the fault stream of `seed`; or
    ``color:C:K`` (the K lowest-id supporters of color C).
    """
    if spec is None:
        return frozenset()
    if isinstance(spec, (list, tuple, set, frozenset)):
        if not all(isinstance(u, int) for u in spec):
            raise ConfigError("faulty: ids must be integers")
        return frozenset(spec)
    if isinstance(spec, str):
        parts = [p.strip() for p in spec.split(":")]
        if parts[0] == "random" and len(parts) <= 2:
            spec = {"random": int(parts[1])} if len(parts) == 2 else "random"
        elif parts[0] == "color" and len(parts) == 3:
            spec = {"color": int(parts[1]), "count": int(parts[2])}
        elif all(p.lstrip("-").isdigit() for p in spec.split(",")):
            return frozenset(int(p) for p in spec.split(","))
        if spec == "random":
            spec = {"random": math.floor(alpha * n)}
    if isinstance(spec, Mapping):
        if set(spec) == {"random"}:
            k = int(spec["random"])
            if not 0 <= k <= n:
                raise ConfigError(f"faulty: random count {k} out of range")
            rng = derive_stream(seed, FAULT_STREAM_TAG)
            return frozenset(
                int(u) + 1 for u in rng.choice(n, size=k, replace=False))
        if set(spec) == {"color", "count"}:
            c, k = int(spec["color"]), int(spec["count"])
            picked = [u for u in range(1, n + 1) if colors[u - 1] == c][:k]
            if len(picked) < k:
                raise ConfigError(
                    f"faulty: only {len(picked)} supporters of color {c}")
            return frozenset(picked)
    raise ConfigError(f"faulty: unrecognized specification {spec!r}")


def resolve_coalition(spec: Any) -> Optional[CoalitionConfig]:
    if spec is None:
        return None
    if not isinstance(spec, Mapping):
        raise ConfigError(f"coalition: expected a map, got {spec!r}")
    unknown = set(spec) - {"members", "strategy", "options"}
    if unknown:
        raise ConfigError(f"coalition: unknown keys {sorted(unknown)}")
    members = spec.get("members")
    if not members or not all(isinstance(u, int) for u in members):
        raise ConfigError("coalition.members: need a list of agent ids")
    strategy = spec.get("strategy", "honest")
    if strategy not in STRATEGIES:
        raise ConfigError(f"coalition.strategy: unknown strategy {strategy!r}")
    options = spec.get("options") or {}
    if not isinstance(options, Mapping):
        raise ConfigError("coalition.options: expected a map")
    return CoalitionConfig(members=tuple(members), strategy=strategy,
                           options=dict(options))


def resolve_calibration(spec: Any) -> Calibration:
    if spec is None:
        return DEFAULT_CALIBRATION
    if isinstance(spec, Calibration):
        return spec
    if not isinstance(spec, Mapping) or set(spec) - {"beta1", "beta2"}:
        raise ConfigError(f"calibration: expected beta1/beta2, got {spec!r}")
    return Calibration(
        beta1=float(spec.get("beta1", DEFAULT_CALIBRATION.beta1)),
        beta2=float(spec.get("beta2", DEFAULT_CALIBRATION.beta2)))


def parse_config(doc: Optional[Mapping] = None,
                 overrides: Optional[Mapping] = None,
                 ) -> tuple[SimConfig, ExperimentConfig]:
    """Merge a config document with flag overrides and resolve both levels.

    Overrides win key by key; None overrides are ignored. All defaults are
    applied here (gamma 4, chi 1, sigma_mult 4, alpha 0.25).
    """
    merged: dict[str, Any] = dict(doc or {})
    for k, v in (overrides or {}).items():
        if v is not None:
            merged[k] = v
    unknown = set(merged) - _SIM_KEYS - _EXP_KEYS
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if "n" not in merged:
        raise ConfigError("n: required")
    n = merged["n"]
    if not isinstance(n, int) or n < 1:
        raise ConfigError(f"n: need a positive integer, got {n!r}")

    exp = ExperimentConfig(
        trials=int(merged.get("trials", 1000)),
        seed=int(merged.get("seed", 0)),
        sigma_mult=float(merged.get("sigma_mult", 4.0)),
        max_fail_rate=float(merged.get("max_fail_rate", 0.01)),
        alpha=float(merged.get("alpha", 0.25)),
        sizes=tuple(merged.get("sizes", (16, 64, 256))),
        calibration=resolve_calibration(merged.get("calibration")))
    if exp.trials < 1:
        raise ConfigError(f"trials: need at least 1, got {exp.trials}")

    colors = expand_colors(merged.get("colors"), n)
    num_colors = int(merged.get("num_colors",
                                max(2, max(colors, default=2))))
    sim = SimConfig(
        n=n,
        gamma=float(merged.get("gamma", 4.0)),
        colors=colors,
        chi=float(merged.get("chi", 1.0)),
        num_colors=num_colors,
        faulty=resolve_faulty(merged.get("faulty"), n, colors, exp.seed,
                              exp.alpha),
        coalition=resolve_coalition(merged.get("coalition")),
        master_seed=exp.seed)
    validate_config(sim)
    return sim, exp
