"""Scenario files: JSON schema, typed configuration and seeded substreams.

Randomness rule: every consumer draws from its own named substream of the
single scenario seed,

    substream_seed(seed, name) = SeedSequence(seed, spawn_key=(crc32(name),))

with names "weights", "noise", "fault-values" and "initial-state". Changing
how one consumer draws never perturbs the others.
"""

from __future__ import annotations

import copy
import hashlib
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import weights as weights_mod
from .iteration import ADDITIVE, PACKET_DROP, Fault, FaultModel
from .kinematics import JerkSegment, SpeedFault, platoon_profiles, DEFAULT_NOISE
from .topology import Graph, PlatoonSpec, SpecificationError, build_platoon


class ScenarioError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path or "<root>"
        super().__init__(f"{self.path}: {message}")


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_VEHICLE = {"type": "integer", "minimum": 1}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["graph"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "graph": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["platoon"],
                    "additionalProperties": False,
                    "properties": {
                        "platoon": {
                            "type": "object",
                            "required": ["n", "k"],
                            "additionalProperties": False,
                            "properties": {"n": {"type": "integer"}, "k": {"type": "integer"}},
                        }
                    },
                },
                {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "array", "items": _VEHICLE, "minItems": 2, "maxItems": 2},
                },
                {
                    "type": "object",
                    "required": ["n", "edges"],
                    "additionalProperties": False,
                    "properties": {
                        "n": {"type": "integer", "minimum": 1},
                        "edges": {
                            "type": "array",
                            "items": {"type": "array", "items": _VEHICLE, "minItems": 2, "maxItems": 2},
                        },
                    },
                },
            ]
        },
        "weights": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "stable": {"type": "boolean"},
                "rho_max": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "matrix": {"type": "array", "items": {"type": "array", "items": _NUM}},
            },
        },
        "comm_faults": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["vehicle"],
                "additionalProperties": False,
                "properties": {
                    "vehicle": _VEHICLE,
                    "mode": {"enum": [ADDITIVE, PACKET_DROP]},
                    "values": {"type": "array", "items": _NUM},
                    "constant": _NUM,
                    "random_scale": _POS,
                },
            },
        },
        "recovery": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "f": {"type": "integer", "minimum": 0},
                "horizon": {"type": ["integer", "null"], "minimum": 0},
                "tol": _POS,
                "max_supports": {"type": "integer", "minimum": 1},
            },
        },
        "calc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "vehicles": {"type": "array", "items": _VEHICLE},
                "horizon": {"type": ["integer", "null"], "minimum": 0},
                "x0": {
                    "oneOf": [
                        {"const": "random"},
                        {"type": "array", "items": _NUM},
                        {
                            "type": "object",
                            "required": ["channel"],
                            "additionalProperties": False,
                            "properties": {
                                "channel": {"enum": ["position", "speed", "acceleration"]},
                                "t": _NUM,
                            },
                        },
                    ]
                },
                "x0_scale": _POS,
                "norm_steps": {"type": "integer", "minimum": 0},
                "flag_window": {"type": "integer", "minimum": 1},
                "flag_tol": _POS,
            },
        },
        "kinematics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt": _POS,
                "T": _POS,
                "spacing": _NUM,
                "initial_speed": _NUM,
                "initial_acceleration": _NUM,
                "segments": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["t", "jerk"],
                        "additionalProperties": False,
                        "properties": {"t": {"type": "number", "minimum": 0}, "jerk": _NUM},
                    },
                },
                "overrides": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["vehicle"],
                        "additionalProperties": False,
                        "properties": {
                            "vehicle": _VEHICLE,
                            "p0": _NUM,
                            "u0": _NUM,
                            "a0": _NUM,
                            "segments": {
                                "type": "array",
                                "items": {
                                    "type": "object",
                                    "required": ["t", "jerk"],
                                    "additionalProperties": False,
                                    "properties": {"t": {"type": "number", "minimum": 0}, "jerk": _NUM},
                                },
                            },
                        },
                    },
                },
                "noise": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "p": {"type": "number", "minimum": 0},
                        "u": {"type": "number", "minimum": 0},
                        "a": {"type": "number", "minimum": 0},
                    },
                },
                "speed_faults": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["vehicle", "value"],
                        "additionalProperties": False,
                        "properties": {
                            "vehicle": _VEHICLE,
                            "onset": {"type": "number", "minimum": 0},
                            "kind": {"enum": ["bias", "ramp", "scale"]},
                            "value": _NUM,
                        },
                    },
                },
            },
        },
        "diagnosis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "vehicles": {"type": "array", "items": _VEHICLE},
                "kappa1": _POS,
                "kappa2": _POS,
                "threshold": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "threshold_factor": _POS,
                "calibration": _POS,
                "window": _POS,
                "quorum": {"type": "number", "exclusiveMinimum": 0.5, "maximum": 1},
                "diff_halfwidth": {"type": "integer", "minimum": 1},
                "method": {"enum": ["derivative", "integral"]},
                "flag_steps": {"type": "integer", "minimum": 1},
                "flag_tol": _POS,
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}


def substream_seed(seed: int, name: str) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()),))
    return int(ss.generate_state(1, np.uint64)[0])


def substream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(substream_seed(seed, name))


@dataclass(frozen=True)
class CommFaultConfig:
    vehicle: int
    mode: str = ADDITIVE
    values: tuple[float, ...] | None = None
    constant: float | None = None
    random_scale: float | None = None


@dataclass(frozen=True)
class RecoveryConfig:
    f: int = 0
    horizon: int | None = None
    tol: float = 1e-7
    max_supports: int = 200_000


@dataclass(frozen=True)
class CalcConfig:
    vehicles: tuple[int, ...] | None = None
    horizon: int | None = None
    x0: Any = "random"
    x0_scale: float = 1.0
    norm_steps: int = 200
    flag_window: int = 10
    flag_tol: float = 1e-6


@dataclass(frozen=True)
class KinematicsConfig:
    dt: float = 0.01
    T: float = 10.0
    spacing: float = 10.0
    initial_speed: float = 20.0
    initial_acceleration: float = 0.0
    segments: tuple[JerkSegment, ...] = ()
    overrides: dict = field(default_factory=dict)
    noise: dict = field(default_factory=lambda: dict(DEFAULT_NOISE))
    speed_faults: tuple[SpeedFault, ...] = ()


@dataclass(frozen=True)
class DiagnosisConfig:
    vehicles: tuple[int, ...] | None = None
    kappa1: float = 0.5
    kappa2: float = 0.5
    threshold: float | None = None
    threshold_factor: float = 5.0
    calibration: float = 1.0
    window: float = 1.0
    quorum: float = 0.8
    diff_halfwidth: int = 25
    method: str = "derivative"
    flag_steps: int = 200
    flag_tol: float = 1e-6


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    seed: int
    graph: Graph
    platoon: PlatoonSpec | None
    weight_stable: bool
    rho_max: float
    weight_matrix: tuple | None
    comm_faults: tuple[CommFaultConfig, ...]
    recovery: RecoveryConfig
    calc: CalcConfig
    kinematics: KinematicsConfig
    diagnosis: DiagnosisConfig
    output_dir: str
    raw: dict = field(repr=False)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def sha256(self) -> str:
        return scenario_hash(self.raw)

    def weights(self) -> weights_mod.WeightMatrix:
        if self.weight_matrix is not None:
            return weights_mod.from_rows(self.weight_matrix, self.graph)
        return weights_mod.random_weights(
            self.graph, substream_seed(self.seed, "weights"), self.weight_stable, self.rho_max
        )

    def fault_model(self, steps: int) -> FaultModel:
        """Realise comm-fault schedules covering zeta[0..steps]."""
        rng = substream(self.seed, "fault-values")
        faults = []
        for cf in self.comm_faults:
            if cf.mode == PACKET_DROP:
                faults.append(Fault(cf.vehicle, PACKET_DROP))
            elif cf.values is not None:
                faults.append(Fault(cf.vehicle, ADDITIVE, cf.values))
            elif cf.constant is not None:
                faults.append(Fault(cf.vehicle, ADDITIVE, (cf.constant,) * (steps + 1)))
            else:
                scale = cf.random_scale if cf.random_scale is not None else 1.0
                faults.append(Fault(cf.vehicle, ADDITIVE, tuple(scale * rng.standard_normal(steps + 1))))
        return FaultModel(tuple(faults))

    def motion_profiles(self):
        k = self.kinematics
        return platoon_profiles(
            self.n, k.spacing, k.initial_speed, k.initial_acceleration, k.segments, k.overrides
        )


def scenario_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def _path(parts) -> str:
    return "/" + "/".join(str(p) for p in parts) if parts else ""


def validate(raw: dict) -> None:
    """Schema check; raises ScenarioError naming the offending field."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ScenarioError(_path(err.absolute_path), err.message)


def _segments(items) -> tuple[JerkSegment, ...]:
    return tuple(JerkSegment(float(s["t"]), float(s["jerk"])) for s in items)


def from_dict(raw: dict, seed: int | None = None, output_dir: str | None = None) -> Scenario:
    raw = copy.deepcopy(raw)
    if seed is not None:
        raw["seed"] = int(seed)
    validate(raw)

    gspec = raw["graph"]
    spec = None
    try:
        if isinstance(gspec, dict) and "platoon" in gspec:
            spec = PlatoonSpec(gspec["platoon"]["n"], gspec["platoon"]["k"])
            graph = build_platoon(spec)
        elif isinstance(gspec, dict):
            graph = Graph.from_edges(gspec["edges"], n=gspec["n"])
        else:
            graph = Graph.from_edges(gspec)
    except SpecificationError as exc:
        raise ScenarioError("/graph", str(exc)) from None
    n = graph.n

    def vehicle(v, path):
        if not 1 <= v <= n:
            raise ScenarioError(path, f"vehicle {v} does not exist (network has {n})")
        return int(v)

    w = raw.get("weights", {})
    matrix = w.get("matrix")
    if matrix is not None:
        arr = np.asarray(matrix, dtype=float)
        if arr.shape != (n, n):
            raise ScenarioError("/weights/matrix", f"expected {n}x{n} matrix, got shape {arr.shape}")
        if not weights_mod.validate_sparsity(arr, graph):
            raise ScenarioError("/weights/matrix", "nonzero entries outside the graph pattern")
        matrix = tuple(tuple(r) for r in matrix)

    comm = []
    seen = set()
    for idx, cf in enumerate(raw.get("comm_faults", [])):
        path = f"/comm_faults/{idx}"
        v = vehicle(cf["vehicle"], path + "/vehicle")
        if v in seen:
            raise ScenarioError(path + "/vehicle", f"vehicle {v} listed twice")
        seen.add(v)
        mode = cf.get("mode", ADDITIVE)
        given = [k for k in ("values", "constant", "random_scale") if k in cf]
        if mode == PACKET_DROP and given:
            raise ScenarioError(path, "packet-drop faults take no values")
        if len(given) > 1:
            raise ScenarioError(path, f"give at most one of values/constant/random_scale, got {given}")
        comm.append(CommFaultConfig(
            v, mode,
            tuple(float(x) for x in cf["values"]) if "values" in cf else None,
            cf.get("constant"), cf.get("random_scale"),
        ))

    rec = RecoveryConfig(**raw.get("recovery", {}))
    if 2 * rec.f > n:
        raise ScenarioError("/recovery/f", f"2f = {2 * rec.f} exceeds network size {n}")

    c = dict(raw.get("calc", {}))
    if "vehicles" in c:
        c["vehicles"] = tuple(vehicle(v, f"/calc/vehicles/{i}") for i, v in enumerate(c["vehicles"]))
    if isinstance(c.get("x0"), list):
        if len(c["x0"]) != n:
            raise ScenarioError("/calc/x0", f"expected {n} initial values, got {len(c['x0'])}")
        c["x0"] = tuple(float(x) for x in c["x0"])
    calc = CalcConfig(**c)

    k = dict(raw.get("kinematics", {}))
    kin_kwargs = {key: k[key] for key in ("dt", "T", "spacing", "initial_speed", "initial_acceleration") if key in k}
    if k.get("T", 10.0) < k.get("dt", 0.01):
        raise ScenarioError("/kinematics/T", "T must be at least dt")
    noise = dict(DEFAULT_NOISE)
    noise.update(k.get("noise", {}))
    overrides = {}
    for idx, ov in enumerate(k.get("overrides", [])):
        v = vehicle(ov["vehicle"], f"/kinematics/overrides/{idx}/vehicle")
        fields = {key: float(ov[key]) for key in ("p0", "u0", "a0") if key in ov}
        if "segments" in ov:
            fields["segments"] = _segments(ov["segments"])
        overrides[v] = fields
    T = float(k.get("T", 10.0))
    speed_faults = []
    for idx, sf in enumerate(k.get("speed_faults", [])):
        path = f"/kinematics/speed_faults/{idx}"
        v = vehicle(sf["vehicle"], path + "/vehicle")
        onset = float(sf.get("onset", 0.0))
        if onset > T:
            raise ScenarioError(path + "/onset", f"onset {onset} beyond trace end {T}")
        speed_faults.append(SpeedFault(v, onset, sf.get("kind", "bias"), float(sf["value"])))
    kin = KinematicsConfig(
        **kin_kwargs, segments=_segments(k.get("segments", [])), overrides=overrides,
        noise=noise, speed_faults=tuple(speed_faults),
    )

    d = dict(raw.get("diagnosis", {}))
    if "vehicles" in d:
        d["vehicles"] = tuple(vehicle(v, f"/diagnosis/vehicles/{i}") for i, v in enumerate(d["vehicles"]))
    diag = DiagnosisConfig(**d)
    samples = int(round(kin.T / kin.dt)) + 1
    if samples < 4 * diag.diff_halfwidth + 1:
        raise ScenarioError("/diagnosis/diff_halfwidth", f"too wide for {samples} samples")

    name = raw.get("name", "scenario")
    out = output_dir or raw.get("output", {}).get("dir") or str(Path("out") / name)
    return Scenario(
        name=name, seed=int(raw.get("seed", 0)), graph=graph, platoon=spec,
        weight_stable=bool(w.get("stable", True)), rho_max=float(w.get("rho_max", weights_mod.DEFAULT_RHO_MAX)),
        weight_matrix=matrix, comm_faults=tuple(comm), recovery=rec, calc=calc,
        kinematics=kin, diagnosis=diag, output_dir=out, raw=raw,
    )


def load(path, seed: int | None = None, output_dir: str | None = None) -> Scenario:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("", f"not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ScenarioError("", "scenario must be a JSON object")
    return from_dict(raw, seed=seed, output_dir=output_dir)
