"""Config schema: validation with exhaustive error reporting, and assembly
of model/dissipator/run objects from a validated mapping.

Units default to hbar = kB = 1; masses and frequencies are in the same
arbitrary consistent system. All validation errors found in one pass are
collected and reported together with their key paths, so a config with
five mistakes produces five messages, not a fix-rerun loop.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass

import numpy as np
import yaml

from .channels import (
    DissipatorSpec,
    build_grid_channel,
    build_lowering_channel,
    build_osc_channel,
    build_osc_finite_T_channel,
)
from .hilbert import DensityMatrix, MomentumGrid, Operator, grid_operators
from .models import (
    GroundStateSpec,
    OscillatorModel,
    build_hamiltonian,
    displaced_ket,
    gaussian_ground_spec,
    grid_model,
    ground_ket,
    ground_state_vector,
    normal_mode_ops,
    oscillator_space,
    physical_to_normal,
    thermal_state,
)
from .serialize import load_density_matrix, load_operator

__all__ = [
    "ConfigError",
    "OBSERVABLE_NAMES",
    "load_config",
    "validate_config",
    "ModelBundle",
    "build_model_bundle",
    "build_dissipator",
    "observable_map",
    "initial_state",
    "momentum_probe_ops",
]

OBSERVABLE_NAMES = ("x1", "p1", "x2", "p2", "n1", "n2", "energy", "gs_fidelity")
_GRID_OBSERVABLES = ("p1", "energy", "gs_fidelity")
_GAIN_FACTORS = ("p1", "p2", "x2", "p1p", "p2p")

_REQUIRED = object()


class ConfigError(ValueError):
    """Carries every schema violation found, one per line."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n" + "\n".join(
            f"  {e}" for e in self.errors))


class _Ctx:
    def __init__(self):
        self.errors = []

    def err(self, path: str, msg: str):
        self.errors.append(f"{path}: {msg}")


def _get_mapping(ctx, parent, key, path, required=False):
    val = parent.get(key)
    if val is None:
        if required:
            ctx.err(path, "section is required")
        return {}
    if not isinstance(val, dict):
        ctx.err(path, "must be a mapping")
        return {}
    return val


def _check_unknown(ctx, section, path, allowed):
    for key in section:
        if key not in allowed:
            ctx.err(f"{path}.{key}", "unknown key")


def _num(ctx, section, key, path, default=_REQUIRED, minimum=None,
         maximum=None, exclusive_min=False):
    val = section.get(key, default)
    if val is _REQUIRED:
        ctx.err(f"{path}.{key}", "is required")
        return None
    if val is None:
        return None
    if isinstance(val, bool) or not isinstance(val, numbers.Real):
        ctx.err(f"{path}.{key}", f"must be a number, got {type(val).__name__}")
        return None
    val = float(val)
    if minimum is not None:
        if exclusive_min and val <= minimum:
            ctx.err(f"{path}.{key}", f"must be > {minimum}")
            return None
        if not exclusive_min and val < minimum:
            ctx.err(f"{path}.{key}", f"must be >= {minimum}")
            return None
    if maximum is not None and val > maximum:
        ctx.err(f"{path}.{key}", f"must be <= {maximum}")
        return None
    return val


def _int(ctx, section, key, path, default=_REQUIRED, minimum=None):
    val = section.get(key, default)
    if val is _REQUIRED:
        ctx.err(f"{path}.{key}", "is required")
        return None
    if val is None:
        return None
    if isinstance(val, bool) or not isinstance(val, numbers.Integral):
        ctx.err(f"{path}.{key}", f"must be an integer, got {type(val).__name__}")
        return None
    val = int(val)
    if minimum is not None and val < minimum:
        ctx.err(f"{path}.{key}", f"must be >= {minimum}")
        return None
    return val


def _choice(ctx, section, key, path, choices, default=_REQUIRED):
    val = section.get(key, default)
    if val is _REQUIRED:
        ctx.err(f"{path}.{key}", f"is required (one of {', '.join(choices)})")
        return None
    if val not in choices:
        ctx.err(f"{path}.{key}", f"must be one of {', '.join(choices)}, got {val!r}")
        return None
    return val


def _bool(ctx, section, key, path, default):
    val = section.get(key, default)
    if not isinstance(val, bool):
        ctx.err(f"{path}.{key}", "must be true or false")
        return default
    return val


def _complex_like(ctx, section, key, path, default=0.0):
    """Accept a real number or a [re, im] pair."""
    val = section.get(key, default)
    if val is _REQUIRED:
        ctx.err(f"{path}.{key}", "is required")
        return None
    if isinstance(val, bool):
        ctx.err(f"{path}.{key}", "must be a number or [re, im] pair")
        return None
    if isinstance(val, numbers.Real):
        return complex(float(val), 0.0)
    if (isinstance(val, (list, tuple)) and len(val) == 2
            and all(isinstance(x, numbers.Real) and not isinstance(x, bool)
                    for x in val)):
        return complex(float(val[0]), float(val[1]))
    ctx.err(f"{path}.{key}", "must be a number or [re, im] pair")
    return None


def _truncation(ctx, section, path):
    val = section.get("truncation")
    if val is None:
        ctx.err(f"{path}.truncation", "is required")
        return None
    if isinstance(val, numbers.Integral) and not isinstance(val, bool):
        if val < 2:
            ctx.err(f"{path}.truncation", "must be >= 2")
            return None
        return (int(val), int(val))
    if (isinstance(val, (list, tuple)) and len(val) == 2
            and all(isinstance(x, numbers.Integral) and not isinstance(x, bool)
                    for x in val)):
        if any(x < 2 for x in val):
            ctx.err(f"{path}.truncation", "each entry must be >= 2")
            return None
        return (int(val[0]), int(val[1]))
    ctx.err(f"{path}.truncation", "must be an integer or a pair of integers")
    return None


def _pair(ctx, section, key, path, default=_REQUIRED, positive=False):
    val = section.get(key, default)
    if val is _REQUIRED:
        ctx.err(f"{path}.{key}", "is required")
        return None
    if val is None:
        return None
    ok = (isinstance(val, (list, tuple)) and len(val) == 2
          and all(isinstance(x, numbers.Real) and not isinstance(x, bool)
                  for x in val))
    if not ok:
        ctx.err(f"{path}.{key}", "must be a pair of numbers")
        return None
    if positive and any(x <= 0 for x in val):
        ctx.err(f"{path}.{key}", "entries must be > 0")
        return None
    return (float(val[0]), float(val[1]))


# ---------------------------------------------------------------------------
# Section validators


def _validate_model(ctx, raw):
    sec = _get_mapping(ctx, raw, "model", "model", required=True)
    if not sec:
        return {}
    kind = _choice(ctx, sec, "kind", "model",
                   ("oscillator", "oscillator-physical", "grid"))
    out = {"kind": kind}
    if kind == "oscillator":
        _check_unknown(ctx, sec, "model",
                       ("kind", "omega1", "omega2", "theta", "m1", "m2",
                        "hbar", "kB", "truncation"))
        out["omega1"] = _num(ctx, sec, "omega1", "model", minimum=0, exclusive_min=True)
        out["omega2"] = _num(ctx, sec, "omega2", "model", minimum=0, exclusive_min=True)
        out["theta"] = _num(ctx, sec, "theta", "model")
        out["m1"] = _num(ctx, sec, "m1", "model", default=1.0, minimum=0, exclusive_min=True)
        out["m2"] = _num(ctx, sec, "m2", "model", default=1.0, minimum=0, exclusive_min=True)
        out["hbar"] = _num(ctx, sec, "hbar", "model", default=1.0, minimum=0, exclusive_min=True)
        out["kB"] = _num(ctx, sec, "kB", "model", default=1.0, minimum=0, exclusive_min=True)
        out["truncation"] = _truncation(ctx, sec, "model")
    elif kind == "oscillator-physical":
        _check_unknown(ctx, sec, "model",
                       ("kind", "M", "mu", "m1", "omega_trap", "k_vib",
                        "hbar", "kB", "truncation"))
        for key in ("M", "mu", "m1", "omega_trap", "k_vib"):
            out[key] = _num(ctx, sec, key, "model", minimum=0, exclusive_min=True)
        out["hbar"] = _num(ctx, sec, "hbar", "model", default=1.0, minimum=0, exclusive_min=True)
        out["kB"] = _num(ctx, sec, "kB", "model", default=1.0, minimum=0, exclusive_min=True)
        out["truncation"] = _truncation(ctx, sec, "model")
    elif kind == "grid":
        _check_unknown(ctx, sec, "model",
                       ("kind", "points", "p_min", "dp", "sigmas", "centers",
                        "weights", "level_gaps", "hbar", "kB"))
        out["points"] = _int(ctx, sec, "points", "model", minimum=4)
        out["p_min"] = _num(ctx, sec, "p_min", "model")
        out["dp"] = _num(ctx, sec, "dp", "model", minimum=0, exclusive_min=True)
        out["sigmas"] = _pair(ctx, sec, "sigmas", "model", positive=True)
        out["centers"] = _pair(ctx, sec, "centers", "model", default=(0.0, 0.0))
        out["weights"] = _pair(ctx, sec, "weights", "model", default=(1.0, 1.0),
                               positive=True)
        out["level_gaps"] = _num(ctx, sec, "level_gaps", "model", default=1.0,
                                 minimum=0, exclusive_min=True)
        out["hbar"] = _num(ctx, sec, "hbar", "model", default=1.0, minimum=0, exclusive_min=True)
        out["kB"] = _num(ctx, sec, "kB", "model", default=1.0, minimum=0, exclusive_min=True)
    return out


def _validate_gain(ctx, ch, path):
    gain = ch.get("gain", 1.0)
    if isinstance(gain, numbers.Real) and not isinstance(gain, bool):
        return float(gain)
    if isinstance(gain, dict):
        terms = gain.get("terms")
        _check_unknown(ctx, gain, f"{path}.gain", ("terms",))
        if not isinstance(terms, list) or not terms:
            ctx.err(f"{path}.gain.terms", "must be a nonempty list")
            return None
        clean = []
        for i, term in enumerate(terms):
            tp = f"{path}.gain.terms[{i}]"
            if not isinstance(term, dict):
                ctx.err(tp, "must be a mapping with coeff/factors")
                continue
            _check_unknown(ctx, term, tp, ("coeff", "factors"))
            coeff = _complex_like(ctx, term, "coeff", tp, default=1.0)
            factors = term.get("factors", [])
            if not isinstance(factors, list) or not all(
                    isinstance(f, str) for f in factors):
                ctx.err(f"{tp}.factors", "must be a list of operator labels")
                continue
            for f in factors:
                if f not in _GAIN_FACTORS:
                    ctx.err(f"{tp}.factors", f"unknown or disallowed factor {f!r} "
                            f"(allowed: {', '.join(_GAIN_FACTORS)})")
            clean.append({"coeff": coeff, "factors": list(factors)})
        return {"terms": clean}
    ctx.err(f"{path}.gain", "must be a number or a {terms: [...]} mapping")
    return None


def _validate_profile(ctx, ch, key, path, points):
    val = ch.get(key)
    if val is None:
        return None
    if isinstance(val, numbers.Real) and not isinstance(val, bool):
        return [float(val)] * (points or 0) or None
    if not isinstance(val, list) or not all(
            isinstance(x, numbers.Real) and not isinstance(x, bool) for x in val):
        ctx.err(f"{path}.{key}", "must be a number (constant profile) or a "
                                 "list of per-point samples")
        return None
    if points is not None and len(val) != points:
        ctx.err(f"{path}.{key}", f"must have {points} samples to match the grid")
        return None
    return [float(x) for x in val]


def _validate_dissipator(ctx, raw, model_cfg):
    sec = _get_mapping(ctx, raw, "dissipator", "dissipator", required=True)
    if not sec:
        return {}
    _check_unknown(ctx, sec, "dissipator", ("channels",))
    chans = sec.get("channels")
    if not isinstance(chans, list) or not chans:
        ctx.err("dissipator.channels", "must be a nonempty list")
        return {"channels": []}
    kind = model_cfg.get("kind")
    out = []
    for i, ch in enumerate(chans):
        path = f"dissipator.channels[{i}]"
        if not isinstance(ch, dict):
            ctx.err(path, "must be a mapping")
            continue
        ctype = _choice(ctx, ch, "type", path,
                        ("osc", "osc-finite-T", "grid", "lowering"))
        if ctype is None:
            continue
        entry = {"type": ctype}
        if ctype in ("osc", "osc-finite-T", "lowering") and kind == "grid":
            ctx.err(path, f"channel type {ctype!r} needs an oscillator model")
        if ctype == "grid" and kind in ("oscillator", "oscillator-physical"):
            ctx.err(path, "grid channels need a grid model")
        if ctype == "osc":
            _check_unknown(ctx, ch, path, ("type", "kappa", "alpha", "gain"))
            entry["kappa"] = _num(ctx, ch, "kappa", path)
            entry["alpha"] = _complex_like(ctx, ch, "alpha", path)
            entry["gain"] = _validate_gain(ctx, ch, path)
        elif ctype == "osc-finite-T":
            _check_unknown(ctx, ch, path, ("type", "kappa", "T"))
            entry["kappa"] = _num(ctx, ch, "kappa", path)
            entry["T"] = _num(ctx, ch, "T", path, minimum=0, exclusive_min=True)
        elif ctype == "grid":
            _check_unknown(ctx, ch, path, ("type", "kappa", "alpha", "G0", "G1"))
            entry["kappa"] = _num(ctx, ch, "kappa", path)
            entry["alpha"] = _complex_like(ctx, ch, "alpha", path)
            points = model_cfg.get("points")
            entry["G0"] = _validate_profile(ctx, ch, "G0", path, points)
            entry["G1"] = _validate_profile(ctx, ch, "G1", path, points)
        elif ctype == "lowering":
            _check_unknown(ctx, ch, path, ("type", "mode", "strength"))
            mode = _int(ctx, ch, "mode", path, default=1, minimum=1)
            if mode is not None and mode not in (1, 2):
                ctx.err(f"{path}.mode", "must be 1 or 2")
                mode = None
            entry["mode"] = mode
            entry["strength"] = _num(ctx, ch, "strength", path, default=1.0,
                                     minimum=0, exclusive_min=True)
        out.append(entry)
    return {"channels": out}


def _validate_observables(ctx, sec, path, kind):
    entries = sec.get("observables", ["energy", "gs_fidelity"])
    if not isinstance(entries, list):
        ctx.err(f"{path}.observables", "must be a list")
        return []
    allowed = _GRID_OBSERVABLES if kind == "grid" else OBSERVABLE_NAMES
    out = []
    for i, e in enumerate(entries):
        ep = f"{path}.observables[{i}]"
        if isinstance(e, str):
            if e not in allowed:
                ctx.err(ep, f"unknown observable {e!r} for this model kind "
                            f"(allowed: {', '.join(allowed)})")
                continue
            out.append({"name": e})
        elif isinstance(e, dict):
            _check_unknown(ctx, e, ep, ("name", "path"))
            name, opath = e.get("name"), e.get("path")
            if not isinstance(name, str) or not name:
                ctx.err(f"{ep}.name", "custom observable needs a name")
                continue
            if not isinstance(opath, str) or not opath:
                ctx.err(f"{ep}.path", "custom observable needs an operator file path")
                continue
            out.append({"name": name, "path": opath})
        else:
            ctx.err(ep, "must be an observable name or {name, path} mapping")
    return out


def _validate_run(ctx, raw, model_cfg):
    sec = _get_mapping(ctx, raw, "run", "run")
    _check_unknown(ctx, sec, "run",
                   ("initial", "temperature", "mode", "amount", "steps", "path",
                    "t_final", "snapshots", "method", "dt", "rtol", "atol",
                    "record_steps", "observables", "seed"))
    out = {}
    kind = model_cfg.get("kind")
    out["initial"] = _choice(ctx, sec, "initial", "run",
                             ("ground", "gibbs", "displaced", "kicked", "custom"),
                             default="ground")
    if out["initial"] == "gibbs":
        out["temperature"] = _num(ctx, sec, "temperature", "run", minimum=0)
    if out["initial"] == "displaced":
        if kind == "grid":
            ctx.err("run.initial", "displaced initial state needs an oscillator model")
        mode = _int(ctx, sec, "mode", "run", default=1)
        if mode is not None and mode not in (1, 2):
            ctx.err("run.mode", "must be 1 or 2")
            mode = None
        out["mode"] = mode
        out["amount"] = _complex_like(ctx, sec, "amount", "run", default=_REQUIRED)
    if out["initial"] == "kicked":
        if kind != "grid":
            ctx.err("run.initial", "kicked initial state needs a grid model "
                                   "(use displaced for oscillator models)")
        steps = _int(ctx, sec, "steps", "run")
        if steps == 0:
            ctx.err("run.steps", "must be a nonzero number of grid steps")
            steps = None
        out["steps"] = steps
    if out["initial"] == "custom":
        p = sec.get("path")
        if not isinstance(p, str) or not p:
            ctx.err("run.path", "custom initial state needs a file path")
        out["path"] = p
    out["t_final"] = _num(ctx, sec, "t_final", "run", default=10.0,
                          minimum=0, exclusive_min=True)
    out["snapshots"] = _int(ctx, sec, "snapshots", "run", default=21, minimum=2)
    out["method"] = _choice(ctx, sec, "method", "run", ("rk4", "rk45"),
                            default="rk4")
    out["dt"] = _num(ctx, sec, "dt", "run", default=None, minimum=0,
                     exclusive_min=True)
    out["rtol"] = _num(ctx, sec, "rtol", "run", default=1e-8, minimum=0,
                       exclusive_min=True)
    out["atol"] = _num(ctx, sec, "atol", "run", default=1e-10, minimum=0,
                       exclusive_min=True)
    out["record_steps"] = _bool(ctx, sec, "record_steps", "run", False)
    out["observables"] = _validate_observables(ctx, sec, "run", kind)
    out["seed"] = _int(ctx, sec, "seed", "run", default=0, minimum=0)
    return out


def _validate_check(ctx, raw, model_cfg):
    sec = _get_mapping(ctx, raw, "check", "check")
    _check_unknown(ctx, sec, "check",
                   ("ti", "thermalization", "rt", "decay", "balance",
                    "witnesses", "positivity"))
    out = {}
    ti = _get_mapping(ctx, sec, "ti", "check.ti")
    _check_unknown(ctx, ti, "check.ti",
                   ("enabled", "samples", "tolerance", "support"))
    out["ti"] = {
        "enabled": _bool(ctx, ti, "enabled", "check.ti", True),
        "samples": _int(ctx, ti, "samples", "check.ti", default=20, minimum=1),
        "tolerance": _num(ctx, ti, "tolerance", "check.ti", default=1e-6,
                          minimum=0, exclusive_min=True),
        "support": _int(ctx, ti, "support", "check.ti", default=None, minimum=1),
    }
    th = _get_mapping(ctx, sec, "thermalization", "check.thermalization")
    _check_unknown(ctx, th, "check.thermalization",
                   ("enabled", "tolerance", "temperature"))
    out["thermalization"] = {
        "enabled": _bool(ctx, th, "enabled", "check.thermalization", True),
        "tolerance": _num(ctx, th, "tolerance", "check.thermalization",
                          default=1e-8, minimum=0, exclusive_min=True),
        "temperature": _num(ctx, th, "temperature", "check.thermalization",
                            default=0.0, minimum=0),
    }
    rt = _get_mapping(ctx, sec, "rt", "check.rt")
    _check_unknown(ctx, rt, "check.rt", ("probes", "tolerance"))
    probes = rt.get("probes", [])
    if not isinstance(probes, list) or not all(
            isinstance(x, numbers.Real) and not isinstance(x, bool) and x > 0
            for x in probes):
        ctx.err("check.rt.probes", "must be a list of positive temperatures")
        probes = []
    out["rt"] = {
        "probes": [float(x) for x in probes],
        "tolerance": _num(ctx, rt, "tolerance", "check.rt", default=1e-6,
                          minimum=0, exclusive_min=True),
    }
    if out["rt"]["probes"] and not (out["thermalization"]["temperature"] or 0) > 0:
        ctx.err("check.rt.probes", "need check.thermalization.temperature > 0 "
                                   "as the base temperature")
    dec = _get_mapping(ctx, sec, "decay", "check.decay")
    _check_unknown(ctx, dec, "check.decay", ("enabled", "tolerance"))
    out["decay"] = {
        "enabled": _bool(ctx, dec, "enabled", "check.decay", True),
        "tolerance": _num(ctx, dec, "tolerance", "check.decay", default=1e-8,
                          minimum=0, exclusive_min=True),
    }
    bal = _get_mapping(ctx, sec, "balance", "check.balance")
    _check_unknown(ctx, bal, "check.balance", ("enabled", "tolerance"))
    out["balance"] = {
        "enabled": _bool(ctx, bal, "enabled", "check.balance", True),
        "tolerance": _num(ctx, bal, "tolerance", "check.balance", default=1e-9,
                          minimum=0, exclusive_min=True),
    }
    wit = _get_mapping(ctx, sec, "witnesses", "check.witnesses")
    _check_unknown(ctx, wit, "check.witnesses", ("temperature", "min_obstruction"))
    out["witnesses"] = {
        "temperature": _num(ctx, wit, "temperature", "check.witnesses",
                            default=None, minimum=0, exclusive_min=True),
        "min_obstruction": _num(ctx, wit, "min_obstruction", "check.witnesses",
                                default=0.0, minimum=0),
    }
    pos = _get_mapping(ctx, sec, "positivity", "check.positivity")
    _check_unknown(ctx, pos, "check.positivity",
                   ("enabled", "t_final", "dt", "tolerance", "trace_tolerance"))
    out["positivity"] = {
        "enabled": _bool(ctx, pos, "enabled", "check.positivity", True),
        "t_final": _num(ctx, pos, "t_final", "check.positivity", default=1.0,
                        minimum=0, exclusive_min=True),
        "dt": _num(ctx, pos, "dt", "check.positivity", default=None,
                   minimum=0, exclusive_min=True),
        "tolerance": _num(ctx, pos, "tolerance", "check.positivity",
                          default=1e-8, minimum=0, exclusive_min=True),
        "trace_tolerance": _num(ctx, pos, "trace_tolerance", "check.positivity",
                                default=1e-9, minimum=0, exclusive_min=True),
    }
    return out


def _validate_output(ctx, raw):
    sec = _get_mapping(ctx, raw, "output", "output")
    _check_unknown(ctx, sec, "output", ("directory", "save_states", "figures"))
    directory = sec.get("directory", "out")
    if not isinstance(directory, str) or not directory:
        ctx.err("output.directory", "must be a nonempty string")
        directory = "out"
    return {
        "directory": directory,
        "save_states": _bool(ctx, sec, "save_states", "output", False),
        "figures": _bool(ctx, sec, "figures", "output", True),
    }


def _validate_sweep(ctx, raw):
    if "sweep" not in raw:
        return None
    sec = _get_mapping(ctx, raw, "sweep", "sweep")
    _check_unknown(ctx, sec, "sweep", ("subcommand", "path", "values"))
    sub = _choice(ctx, sec, "subcommand", "sweep",
                  ("evolve", "check", "steady", "forces"))
    path = sec.get("path")
    if not isinstance(path, str) or not path:
        ctx.err("sweep.path", "must be a dotted key path, "
                              "for example dissipator.channels.0.kappa")
        path = None
    values = sec.get("values")
    if not isinstance(values, list) or not values or not all(
            isinstance(x, numbers.Real) and not isinstance(x, bool)
            for x in values):
        ctx.err("sweep.values", "must be a nonempty list of numbers")
        values = []
    # keep integers intact so integer-valued targets (truncation,
    # snapshots, ...) can be swept; YAML distinguishes 5 from 5.0
    return {"subcommand": sub, "path": path,
            "values": [x if isinstance(x, numbers.Integral) else float(x)
                       for x in values]}


_KNOWN_SECTIONS = ("model", "dissipator", "run", "check", "output", "sweep")


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError([f"top level: not parseable as YAML ({exc})"]) from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(["top level: config must be a mapping"])
    return raw


def validate_config(raw: dict, require_dissipator: bool = True) -> dict:
    """Validate and normalize; raises ConfigError listing every problem."""
    ctx = _Ctx()
    for key in raw:
        if key not in _KNOWN_SECTIONS:
            ctx.err(key, "unknown section")
    model = _validate_model(ctx, raw)
    if require_dissipator or "dissipator" in raw:
        dissipator = _validate_dissipator(ctx, raw, model)
    else:
        dissipator = {"channels": []}
    run = _validate_run(ctx, raw, model)
    check = _validate_check(ctx, raw, model)
    output = _validate_output(ctx, raw)
    sweep = _validate_sweep(ctx, raw)
    if ctx.errors:
        raise ConfigError(ctx.errors)
    return {"model": model, "dissipator": dissipator, "run": run,
            "check": check, "output": output, "sweep": sweep}


# ---------------------------------------------------------------------------
# Assembly


@dataclass
class ModelBundle:
    kind: str
    space: object
    H: Operator
    hbar: float
    kB: float
    model: OscillatorModel | None = None
    gs: GroundStateSpec | None = None

    @property
    def ground(self) -> np.ndarray:
        if self.kind == "grid":
            return ground_state_vector(self.gs)
        return ground_ket(self.space)


def build_model_bundle(cfg: dict) -> ModelBundle:
    mc = cfg["model"]
    kind = mc["kind"]
    if kind == "grid":
        grid = MomentumGrid(points=mc["points"], p_min=mc["p_min"], dp=mc["dp"])
        gs = gaussian_ground_spec(grid, sigmas=mc["sigmas"],
                                  centers=mc["centers"], weights=mc["weights"])
        gm = grid_model(gs, level_gaps=mc["level_gaps"])
        return ModelBundle(kind="grid", space=gm.space, H=gm.H,
                           hbar=mc["hbar"], kB=mc["kB"], gs=gs)
    if kind == "oscillator-physical":
        model = physical_to_normal(M=mc["M"], mu=mc["mu"], m1=mc["m1"],
                                   omega_trap=mc["omega_trap"],
                                   k_vib=mc["k_vib"], hbar=mc["hbar"],
                                   kB=mc["kB"])
    else:
        model = OscillatorModel(omega1=mc["omega1"], omega2=mc["omega2"],
                                theta=mc["theta"], m1=mc["m1"], m2=mc["m2"],
                                hbar=mc["hbar"], kB=mc["kB"])
    space = oscillator_space(mc["truncation"])
    H = build_hamiltonian(model, space)
    return ModelBundle(kind="oscillator", space=space, H=H,
                       hbar=model.hbar, kB=model.kB, model=model)


def build_dissipator(cfg: dict, bundle: ModelBundle) -> DissipatorSpec:
    channels = []
    for ch in cfg["dissipator"]["channels"]:
        ctype = ch["type"]
        if ctype == "osc":
            channels.append(build_osc_channel(
                bundle.model, bundle.space, kappa=ch["kappa"],
                alpha=ch["alpha"], gprime=ch["gain"]))
        elif ctype == "osc-finite-T":
            channels.append(build_osc_finite_T_channel(
                bundle.model, bundle.space, kappa=ch["kappa"], T=ch["T"]))
        elif ctype == "grid":
            channels.append(build_grid_channel(
                bundle.gs, kappa=ch["kappa"], alpha=ch["alpha"],
                G0=ch["G0"], G1=ch["G1"], hbar=bundle.hbar))
        elif ctype == "lowering":
            channels.append(build_lowering_channel(
                bundle.model, bundle.space, mode=ch["mode"],
                strength=ch["strength"]))
    return DissipatorSpec(space=bundle.space, channels=tuple(channels),
                          hbar=bundle.hbar)


def observable_map(bundle: ModelBundle, entries) -> dict:
    """Resolve the run.observables entries to named operators."""
    out = {}
    named = {}
    if bundle.kind == "oscillator":
        ops = normal_mode_ops(bundle.model, bundle.space)
        named = {"x1": ops.x1, "p1": ops.p1, "x2": ops.x2, "p2": ops.p2,
                 "n1": ops.mode1.n, "n2": ops.mode2.n}
    else:
        named = {"p1": grid_operators(bundle.space, 1).p}
    g = bundle.ground
    named["energy"] = bundle.H
    named["gs_fidelity"] = Operator(bundle.space, np.outer(g, g.conj()))
    for entry in entries:
        if "path" in entry:
            try:
                out[entry["name"]] = load_operator(entry["path"], bundle.space)
            except (OSError, ValueError) as exc:
                raise ConfigError(
                    [f"run.observables.{entry['name']}: {exc}"]) from exc
        else:
            out[entry["name"]] = named[entry["name"]]
    return out


def initial_state(cfg: dict, bundle: ModelBundle):
    rc = cfg["run"]
    kind = rc["initial"]
    if kind == "ground":
        return DensityMatrix.from_ket(bundle.space, bundle.ground)
    if kind == "gibbs":
        return thermal_state(bundle.H, rc["temperature"], kB=bundle.kB)
    if kind == "displaced":
        ket = displaced_ket(bundle.model, bundle.space, mode=rc["mode"],
                            amount=rc["amount"])
        return DensityMatrix.from_ket(bundle.space, ket)
    if kind == "kicked":
        shift = grid_operators(bundle.space, 1).shift(rc["steps"])
        return DensityMatrix.from_ket(bundle.space,
                                      shift.matrix @ bundle.ground)
    try:
        return load_density_matrix(rc["path"], bundle.space)
    except (OSError, ValueError) as exc:
        raise ConfigError([f"run.path: {exc}"]) from exc


def momentum_probe_ops(bundle: ModelBundle):
    if bundle.kind == "grid":
        return [grid_operators(bundle.space, 1).p]
    return [normal_mode_ops(bundle.model, bundle.space).p1]
