"""Python bindings for the chantwin ray-tracing channel simulator."""

import json

from ._chantwin import (
    InfeasibleError,
    ParseError,
    Scene,
    SceneTooLargeError,
    ValidationError,
    fixture,
    parse_scene,
    profile_names,
)
from . import _chantwin

__all__ = [
    "InfeasibleError",
    "ParseError",
    "Scene",
    "SceneTooLargeError",
    "ValidationError",
    "calibrate",
    "coverage",
    "fixture",
    "load_scene",
    "metrics",
    "parse_scene",
    "profile_names",
    "similarity_index",
    "simulate",
    "synthetic_measurements",
]


def load_scene(path):
    with open(path, encoding="utf-8") as f:
        return parse_scene(f.read())


def _overrides(overrides):
    return json.dumps(overrides) if overrides else ""


def simulate(scene, tx, rx, freq_hz, profile="online", time_s=0.0, overrides=None, threads=1,
             tx_antenna="isotropic", rx_antenna="isotropic"):
    """Single link; returns the MPC document plus path_loss_db and ds_ns."""
    text = _chantwin.simulate_json(scene, tx, rx, freq_hz, profile, time_s, _overrides(overrides), threads,
                                   tx_antenna, rx_antenna)
    doc = json.loads(text)
    doc.update(_chantwin.mpc_metrics(text))
    return doc


def coverage(scene, tx, grid, freq_hz, profile="offline", tx_power_dbm=0.0, time_s=0.0, overrides=None, threads=1):
    """Grid is "xmin,ymin,xmax,ymax,step[,height]"; returns the coverage grid document."""
    return json.loads(_chantwin.coverage_json(scene, tx, grid, freq_hz, profile, tx_power_dbm, time_s,
                                              _overrides(overrides), threads))


def calibrate(scene, tx, measurements_csv, params, validation_count=None, schedule=None, seed=1,
              profile="calibration", threads=1):
    """Simulated annealing over "material.field:lo..hi[@start]" parameters; returns the report document."""
    sched = json.dumps(schedule) if schedule else ""
    return json.loads(_chantwin.calibrate_json(scene, tx, measurements_csv, list(params), validation_count, sched,
                                               seed, profile, threads))


def metrics(mpc_doc):
    return _chantwin.mpc_metrics(json.dumps(mpc_doc))


def similarity_index(a, b, delay_gate_ns=10.0, angle_gate_deg=10.0):
    return _chantwin.similarity_index(json.dumps(a), json.dumps(b), delay_gate_ns, angle_gate_deg)


def synthetic_measurements(scene, tx, count=60, freq_hz=3.5e9, noise_db=0.0, seed=7, truth_concrete_eps=5.0):
    """Measurement CSV text generated by the engine with concrete eps_r set to the given truth."""
    return _chantwin.synthesize_measurements_csv(scene, tx, count, freq_hz, noise_db, seed, truth_concrete_eps)
