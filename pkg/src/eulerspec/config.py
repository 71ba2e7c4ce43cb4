"""Run configuration: files, overrides, canonical serialization, hashing.

A run is fully determined by its RunConfig (all seeds included), so the
persisted copy written next to each run's outputs is enough to reproduce
the run bit for bit. Configs load from TOML or JSON; command-line overrides
always win over file values. The config hash is a SHA-256 over the canonical
JSON form with the output directory excluded, so moving a run's output does
not change its identity.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bas import IntegratorControls
from .flows import (FourierFlow, load_flow_file, make_abc_flow,
                    make_kolmogorov_flow, make_shear_flow)
from .spectrum import SamplePlan

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

VERSION = "0.1.0"

_FLOW_KINDS = ("abc", "shear", "kolmogorov", "file")


@dataclass
class RunConfig:
    """Everything a command needs: flow, sampling plan, integrator, outputs."""

    flow_kind: str = "abc"
    flow_params: dict = field(default_factory=lambda: {"A": 1.0, "B": 1.0, "C": 1.0})
    plan: SamplePlan = field(default_factory=SamplePlan)
    controls: IntegratorControls = field(default_factory=IntegratorControls)
    report_times: list = field(default_factory=lambda: [1.0])
    frame_seed: int = 0
    workers: int | None = None
    outdir: str | None = None

    def __post_init__(self):
        if self.flow_kind not in _FLOW_KINDS:
            raise ValueError(f"unknown flow kind {self.flow_kind!r}; "
                             f"expected one of {_FLOW_KINDS}")
        if self.flow_kind == "file" and "path" not in self.flow_params:
            raise ValueError("flow kind 'file' requires a 'path' parameter")
        self.report_times = [float(t) for t in self.report_times]

    def build_flow(self) -> FourierFlow:
        p = self.flow_params
        if self.flow_kind == "abc":
            return make_abc_flow(float(p.get("A", 1.0)), float(p.get("B", 1.0)),
                                 float(p.get("C", 1.0)))
        if self.flow_kind == "shear":
            return make_shear_flow(p.get("U", (1.0, 0.0, 0.0)))
        if self.flow_kind == "kolmogorov":
            return make_kolmogorov_flow(float(p.get("amplitude", 1.0)))
        return load_flow_file(p["path"])

    def to_dict(self, include_outdir: bool = True) -> dict:
        d = {
            "flow": {"kind": self.flow_kind, **self.flow_params},
            "plan": {
                "count": self.plan.count,
                "strategy": self.plan.strategy,
                "seed": self.plan.seed,
                "constraint": self.plan.constraint,
                "horizon": self.plan.horizon,
                "checkpoints": (None if self.plan.checkpoints is None
                                else [float(c) for c in self.plan.checkpoints]),
            },
            "controls": {
                "rtol": self.controls.rtol,
                "atol": self.controls.atol,
                "reorth_interval": self.controls.reorth_interval,
                "cond_max": self.controls.cond_max,
                "max_steps": self.controls.max_steps,
            },
            "report": {
                "times": list(self.report_times),
                "frame_seed": self.frame_seed,
                "workers": self.workers,
            },
        }
        if include_outdir:
            d["output"] = {"outdir": self.outdir}
        return d

    def config_hash(self) -> str:
        return hashlib.sha256(
            canonical_json(self.to_dict(include_outdir=False)).encode()
        ).hexdigest()

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        flow = dict(raw.get("flow", {}))
        kind = flow.pop("kind", "abc")
        plan_raw = dict(raw.get("plan", {}))
        ctl_raw = dict(raw.get("controls", {}))
        rep = dict(raw.get("report", {}))
        out = dict(raw.get("output", {}))
        unknown = set(raw) - {"flow", "plan", "controls", "report", "output"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        plan = SamplePlan(**plan_raw)
        controls = IntegratorControls(**ctl_raw)
        return cls(
            flow_kind=kind,
            flow_params=flow,
            plan=plan,
            controls=controls,
            report_times=rep.get("times", [1.0]),
            frame_seed=int(rep.get("frame_seed", 0)),
            workers=rep.get("workers"),
            outdir=out.get("outdir"),
        )


def load_config(path) -> RunConfig:
    """Read a RunConfig from a TOML or JSON file (sniffed by suffix)."""
    p = Path(path)
    if p.suffix.lower() == ".json":
        raw = json.loads(p.read_text())
        if "config" in raw and isinstance(raw["config"], dict):
            raw = raw["config"]
    else:
        with open(p, "rb") as fh:
            raw = tomllib.load(fh)
    return RunConfig.from_dict(raw)


def apply_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Return a copy of cfg with any non-None override applied (flags win)."""
    plan_fields = {"count", "strategy", "seed", "constraint", "horizon",
                   "checkpoints"}
    ctl_fields = {"rtol", "atol", "reorth_interval", "cond_max", "max_steps"}
    plan_kw, ctl_kw, top_kw = {}, {}, {}
    for key, val in overrides.items():
        if val is None:
            continue
        if key in plan_fields:
            plan_kw[key] = val
        elif key in ctl_fields:
            ctl_kw[key] = val
        else:
            top_kw[key] = val
    if plan_kw:
        cfg = replace(cfg, plan=replace(cfg.plan, **plan_kw))
    if ctl_kw:
        cfg = replace(cfg, controls=replace(cfg.controls, **ctl_kw))
    if top_kw:
        cfg = replace(cfg, **top_kw)
    return cfg


def _coerce_scalar(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, tight separators, repr-exact floats."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      default=_coerce_scalar)
