"""
TOML parameter files and the frames sidecar.

Layout (indices are 1-based)::

    [dim]
    m = 1
    n = 1

    [drift]
    b = [0.0, 0.0]
    beta = [[-0.5, 0.1], [0.0, 0.0]]    # beta[k] is the drift vector of driver k

    [diffusion]
    a = [[0.0, 0.0], [0.0, 0.0]]
    alpha = [...]                       # one d x d matrix per driver

    [killing]                           # optional
    c = 0.0
    gamma = [0.0, 0.0]

    [jumps.m]                           # state-independent jumps, optional
    [jumps.1]                           # jumps of driver 1, optional
    rate = 1.0
    kind = "exp_coord"
    index = 1
    mean = 0.3
"""

from __future__ import annotations

import json
import sys

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .jumps import measure_from_mapping, measure_to_mapping
from .params import AdmissibleParams, ParameterStructureError, StateDim
from .reduction import ReductionPlan


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending field."""


def _matrix(value, shape, name):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: not numeric ({exc})") from None
    if arr.shape != shape:
        raise ConfigError(f"{name}: shape {arr.shape}, expected {shape}")
    return arr


def params_from_mapping(doc: dict) -> AdmissibleParams:
    try:
        m, n = int(doc["dim"]["m"]), int(doc["dim"]["n"])
        dim = StateDim(m, n)
    except KeyError as exc:
        raise ConfigError(f"dim: missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"dim: {exc}") from None
    d = dim.d
    drift = doc.get("drift", {})
    diff = doc.get("diffusion", {})
    kill = doc.get("killing", {})
    jumps = doc.get("jumps", {})
    unknown = set(jumps) - {"m"} - {str(k) for k in range(1, d + 1)}
    if unknown:
        raise ConfigError(f"jumps: unknown sections {sorted(unknown)}")
    b = _matrix(drift.get("b", [0.0] * d), (d,), "drift.b")
    beta = _matrix(drift.get("beta", np.zeros((d, d)).tolist()), (d, d), "drift.beta")
    a = _matrix(diff.get("a", np.zeros((d, d)).tolist()), (d, d), "diffusion.a")
    alpha = _matrix(diff.get("alpha", np.zeros((d, d, d)).tolist()), (d, d, d), "diffusion.alpha")
    gamma = _matrix(kill.get("gamma", [0.0] * d), (d,), "killing.gamma")
    try:
        c = float(kill.get("c", 0.0))
    except (TypeError, ValueError):
        raise ConfigError("killing.c: not numeric") from None

    def measure(key):
        try:
            return measure_from_mapping(jumps.get(key), d)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"jumps.{key}: {exc}") from None

    try:
        return AdmissibleParams(
            dim, b, beta, a, alpha, c, gamma, measure("m"), tuple(measure(str(k)) for k in range(1, d + 1))
        )
    except ParameterStructureError as exc:
        raise ConfigError(str(exc)) from None


def params_to_mapping(params: AdmissibleParams) -> dict:
    d = params.dim.d
    doc = {
        "dim": {"m": params.dim.m, "n": params.dim.n},
        "drift": {"b": params.b.tolist(), "beta": params.beta.tolist()},
        "diffusion": {"a": params.a.tolist(), "alpha": params.alpha.tolist()},
        "killing": {"c": params.c, "gamma": params.gamma.tolist()},
    }
    jumps = {}
    if not params.m_measure.is_zero:
        jumps["m"] = measure_to_mapping(params.m_measure)
    for k in range(d):
        if not params.M[k].is_zero:
            jumps[str(k + 1)] = measure_to_mapping(params.M[k])
    if jumps:
        doc["jumps"] = jumps
    return doc


def load_params(path) -> AdmissibleParams:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return params_from_mapping(doc)


def dumps_params(params: AdmissibleParams) -> str:
    return tomli_w.dumps(params_to_mapping(params))


def save_params(params: AdmissibleParams, path, header=()):
    with open(path, "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write(dumps_params(params))


def save_sidecar(plan: ReductionPlan, path):
    doc = {
        "frame_matrix": plan.frame_matrix.tolist(),
        "auxiliary": plan.has_aux,
        "original": params_to_mapping(plan.original),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_sidecar(path, reduced: AdmissibleParams) -> ReductionPlan:
    try:
        with open(path) as fh:
            doc = json.load(fh)
        original = params_from_mapping(doc["original"])
        B = np.array(doc["frame_matrix"], dtype=float).reshape(original.dim.n, original.dim.n)
        aux = bool(doc["auxiliary"])
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: malformed frames sidecar ({exc})") from None
    if reduced.dim.m != original.dim.m + aux or reduced.dim.n != original.dim.n:
        raise ConfigError(f"{path}: sidecar does not match the reduced parameter file")
    return ReductionPlan(original, reduced, B, aux)
