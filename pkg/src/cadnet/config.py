"""Experiment configuration: every knob of a training run, with validation.

A config is a plain record; resolution order (preset < config file < CLI
flag) is the CLI's job. Every field lands in the results CSV so a run can
be reproduced from its row alone.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields, replace

AGGREGATORS = ("adacad", "cad_only", "rw", "symna", "ppr", "hk", "none")
ENTROPY_REDUCTIONS = ("mean", "sum")
EARLY_STOP_METRICS = ("acc", "loss")


@dataclass
class ExperimentConfig:
    hidden: int = 64
    K: int = 6
    beta: float = 0.8
    leak_slope: float = 0.05
    p_drop: float = 0.5
    self_loops: bool = True
    epochs: int = 100
    lr0: float = 0.01
    lr_drop_every: int | None = None
    lr_drop_factor: float = 0.5
    weight_decay: float = 5e-4
    lambda_ent: float = 0.5
    early_stop_window: int | None = None
    seed: int = 0
    aggregator: str = "adacad"
    entropy_reduction: str = "mean"
    early_stop_metric: str = "acc"
    detach_transition: bool = False
    wd_include_bias: bool = True
    ppr_alpha: float = 0.1
    hk_time: float = 5.0
    row_normalize: bool = True

    def validate(self) -> "ExperimentConfig":
        checks = [
            (self.hidden >= 1, "hidden must be >= 1"),
            (self.K >= 0, "K must be >= 0"),
            (0 <= self.beta <= 1, "beta must be in [0, 1]"),
            (0 <= self.leak_slope < 1, "leak_slope must be in [0, 1)"),
            (0 <= self.p_drop < 1, "p_drop must be in [0, 1)"),
            (self.epochs >= 1, "epochs must be >= 1"),
            (self.lr0 > 0, "lr0 must be positive"),
            (self.lr_drop_every is None or self.lr_drop_every >= 1,
             "lr_drop_every must be >= 1 when set"),
            (0 < self.lr_drop_factor <= 1, "lr_drop_factor must be in (0, 1]"),
            (self.weight_decay >= 0, "weight_decay must be nonnegative"),
            (self.lambda_ent >= 0, "lambda_ent must be nonnegative"),
            (self.early_stop_window is None or self.early_stop_window >= 1,
             "early_stop_window must be >= 1 when set"),
            (self.aggregator in AGGREGATORS,
             f"aggregator must be one of {AGGREGATORS}"),
            (self.entropy_reduction in ENTROPY_REDUCTIONS,
             f"entropy_reduction must be one of {ENTROPY_REDUCTIONS}"),
            (self.early_stop_metric in EARLY_STOP_METRICS,
             f"early_stop_metric must be one of {EARLY_STOP_METRICS}"),
            (0 < self.ppr_alpha <= 1, "ppr_alpha must be in (0, 1]"),
            (self.hk_time > 0, "hk_time must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(f"invalid config: {msg}")
        return self

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def content_hash(self) -> str:
        """Stable short hash of everything except the seed."""
        d = self.as_dict()
        d.pop("seed")
        payload = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:12]


CONFIG_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def parse_field(name: str, raw: str):
    """Parse a config field from its string form (config files, sweeps)."""
    if name not in CONFIG_FIELD_TYPES:
        raise KeyError(f"unknown config field {name!r}")
    text = raw.strip()
    kind = CONFIG_FIELD_TYPES[name]
    if kind in ("int", int):
        return int(text)
    if kind in ("float", float):
        return float(text)
    if kind in ("bool", bool):
        if text.lower() in ("1", "true", "on", "yes"):
            return True
        if text.lower() in ("0", "false", "off", "no"):
            return False
        raise ValueError(f"cannot parse {text!r} as bool for {name}")
    if kind in ("int | None",):
        return None if text.lower() in ("none", "-", "") else int(text)
    return text
