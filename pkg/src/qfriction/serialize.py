"""File formats: operator/state JSON and trajectory CSV.

Operators are stored as ``{"dims": [...], "re": [[...]], "im": [[...]]}``
where ``dims`` lists the factor dimensions of the underlying space.
Numeric CSV output is rendered with 17 significant digits so that a
round-trip through text is exact for doubles and reruns are byte
identical.
"""

from __future__ import annotations

import json

import numpy as np

from .hilbert import DensityMatrix, HilbertSpace, Operator

__all__ = [
    "operator_to_dict",
    "operator_from_dict",
    "save_operator",
    "load_operator",
    "load_density_matrix",
    "write_trajectory_csv",
    "write_json",
    "FLOAT_FMT",
]

FLOAT_FMT = "%.17g"


def operator_to_dict(op: Operator) -> dict:
    m = op.matrix
    return {
        "dims": list(op.space.dims),
        "re": m.real.tolist(),
        "im": m.imag.tolist(),
    }


def operator_from_dict(data: dict, space: HilbertSpace,
                       cls=Operator) -> Operator:
    """Rebuild an operator on ``space``, validating shape and dims."""
    for key in ("dims", "re", "im"):
        if key not in data:
            raise ValueError(f"operator data is missing the '{key}' field")
    dims = tuple(int(d) for d in data["dims"])
    if dims != space.dims:
        raise ValueError(
            f"stored factor dimensions {dims} do not match the target space {space.dims}")
    re = np.asarray(data["re"], dtype=float)
    im = np.asarray(data["im"], dtype=float)
    if re.shape != im.shape:
        raise ValueError(f"re/im shapes differ: {re.shape} vs {im.shape}")
    dim = space.dim
    if re.shape != (dim, dim):
        raise ValueError(f"matrix shape {re.shape} does not match dims product {dim}")
    return cls(space, re + 1j * im)


def save_operator(path, op: Operator):
    with open(path, "w") as fh:
        json.dump(operator_to_dict(op), fh)


def load_operator(path, space: HilbertSpace) -> Operator:
    with open(path) as fh:
        return operator_from_dict(json.load(fh), space)


def load_density_matrix(path, space: HilbertSpace) -> DensityMatrix:
    """Load a state; the DensityMatrix constructor enforces physicality."""
    with open(path) as fh:
        return operator_from_dict(json.load(fh), space, cls=DensityMatrix)


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def write_trajectory_csv(path, traj, observable_names=None):
    """Write monitor series as CSV: t, trace, herm_defect, min_eig, observables."""
    names = list(observable_names or [])
    for name in names:
        if name not in traj.monitors:
            raise ValueError(f"trajectory has no monitor series named '{name}'")
    cols = ["t", "trace", "herm_defect", "min_eig"] + names
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for i, t in enumerate(traj.times):
            row = [
                _fmt(t),
                _fmt(traj.monitors["trace"][i]),
                _fmt(traj.monitors["herm_defect"][i]),
                _fmt(traj.monitors["min_eig"][i]),
            ]
            row += [_fmt(traj.monitors[name][i]) for name in names]
            fh.write(",".join(row) + "\n")


def write_json(path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
