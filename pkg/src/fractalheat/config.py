"""Experiment configuration: INI-style text files or their JSON equivalents.

Sections: [space] (family/level/metric...), [psi] (kind/beta/a/c),
[schedule] (lambda, boundary profile), [suites] (run = vd,pi,...),
[sweep] (level = 2,3,4 and lambda = 0,0.5,1 axes), [output] (dir),
[run] (seed).  Unknown suites are rejected at parse time.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field, asdict

from .scaling import ScalingFunction, GASKET_WALK_EXPONENT
from .space import SpaceSpec, parse_space_spec

KNOWN_SUITES = ("vd", "rvd", "psi", "pi", "wpi", "pseudo", "sobolev", "csa",
                "assumptions", "propagator", "harnack", "hke")


@dataclass
class ExperimentConfig:
    space: SpaceSpec
    psi_kind: str = "power"
    psi_beta: float | None = None
    psi_coeff: float = 1.0
    psi_c: float = 1.0
    skew_scale: float = 0.0
    suites: tuple = ()
    sweep: dict = field(default_factory=dict)
    output_dir: str = "."
    seed: int = 0

    def scaling(self) -> ScalingFunction:
        beta = self.psi_beta
        if beta is None:
            beta = GASKET_WALK_EXPONENT if self.space.family == "gasket" else 2.0
        if self.psi_kind != "power":
            raise ValueError("config files currently drive power scalings; "
                             "build others via the library API")
        return ScalingFunction.power(beta, a=self.psi_coeff, c_psi=self.psi_c)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["space"] = asdict(self.space)
        return d


def _sections_from_ini(path: str) -> dict:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ValueError(f"cannot read config file {path}")
    return {s: dict(cp.items(s)) for s in cp.sections()}


def _sections_from_json(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: top level must be an object of sections")
    return {str(k): {str(a): str(b) for a, b in v.items()} for k, v in doc.items()}


def load_config(path: str) -> ExperimentConfig:
    sections = (_sections_from_json(path) if str(path).endswith(".json")
                else _sections_from_ini(path))
    return config_from_sections(sections)


def config_from_sections(sections: dict) -> ExperimentConfig:
    sp = sections.get("space", {"family": "path", "level": "8"})
    spec_text = ",".join(f"{k}={v}" for k, v in sp.items())
    space = parse_space_spec(spec_text)

    psi = sections.get("psi", {})
    run = sections.get("run", {})
    sched = sections.get("schedule", {})
    suites_raw = sections.get("suites", {}).get("run", "")
    suites = tuple(s.strip() for s in suites_raw.split(",") if s.strip())
    bad = [s for s in suites if s not in KNOWN_SUITES]
    if bad:
        raise ValueError(f"unknown suites {bad}; known: {KNOWN_SUITES}")
    sweep = {}
    for axis, raw in sections.get("sweep", {}).items():
        if axis not in ("level", "lambda", "eps", "p", "resolution"):
            raise ValueError(f"unknown sweep axis {axis!r}")
        vals = [float(v) for v in raw.split(",") if v.strip()]
        sweep[axis] = [int(v) if axis in ("level", "resolution") else v for v in vals]
    return ExperimentConfig(
        space=space,
        psi_kind=psi.get("kind", "power"),
        psi_beta=float(psi["beta"]) if "beta" in psi else None,
        psi_coeff=float(psi.get("a", 1.0)),
        psi_c=float(psi.get("c", 1.0)),
        skew_scale=float(sched.get("lambda", 0.0)),
        suites=suites,
        sweep=sweep,
        output_dir=sections.get("output", {}).get("dir", "."),
        seed=int(run.get("seed", 0)),
    )
