"""Density-matrix propagation and spectral analysis of the generator.

The right-hand side is (i/hbar)[rho, H] + sum_k D_k[rho]. The stepper
works on raw complex matrices and exploits two structural facts:

* the generator maps Hermitian matrices to Hermitian matrices, so the
  anticommutator part may be formed as m + m^dag with m = (A^dag A) rho,
  saving one matrix product per channel (the public ``liouvillian_rhs``
  in ``channels`` keeps the general four-product form valid for
  arbitrary matrices, and the two agree on Hermitian input);
* the trace of the true right-hand side vanishes identically, so the
  roundoff trace of each evaluation is projected off the diagonal.

After every accepted step the state is re-Hermitized; the defect that
was removed is recorded and reported through the trajectory monitors,
never silently discarded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channels import DissipatorSpec, _mat
from .errors import IntegrationFailure, ResourceLimitError
from .hilbert import Operator

__all__ = [
    "Trajectory",
    "integrate",
    "suggest_dt",
    "assemble_liouvillian",
    "steady_state_analysis",
    "SteadyStateResult",
    "vec",
    "unvec",
]

# Eigenvalues of the generator with modulus at or below this count as kernel.
KERNEL_TOL = 1e-9
# Default ceiling on the superoperator side length (dim^2): 4096 keeps the
# dense matrix at 256 MiB and the eigendecomposition in the tens of seconds.
MAX_SUPEROP_SIDE = 4096


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stack a matrix (columns concatenated top to bottom)."""
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


@dataclass
class Trajectory:
    """Snapshots plus per-snapshot monitors, optionally dense step series.

    ``monitors`` always carries trace, herm_defect (largest Hermiticity
    defect removed since the previous snapshot), min_eig, and the real
    part of each requested observable, all aligned with ``times``.
    ``step_times``/``step_series`` are filled when the integration is run
    with ``record_steps=True`` and hold trace plus the observables at
    every accepted step, which is what derivative-matching checks need.
    """

    times: np.ndarray
    states: list
    monitors: dict
    step_times: np.ndarray | None = None
    step_series: dict | None = None

    @property
    def final_state(self) -> Operator:
        return self.states[-1]


def _make_engine_rhs(H, spec: DissipatorSpec):
    hbar = spec.hbar
    hm = _mat(H)
    dim = hm.shape[0]
    hdiag = np.diag(hm)
    diagonal_h = np.abs(hm - np.diag(hdiag)).max() == 0.0
    phase = (1j / hbar) * (hdiag[None, :].real - hdiag[:, None].real)
    chans = []
    for ch in spec.channels:
        a = ch.matrix
        adag = a.conj().T
        chans.append((a, adag, adag @ a))
    idx = np.arange(dim)

    def rhs(y):
        if diagonal_h:
            out = y * phase
        else:
            out = (1j / hbar) * (y @ hm - hm @ y)
        for a, adag, k in chans:
            out += (a @ y) @ adag
            m = k @ y
            out -= 0.5 * (m + m.conj().T)
        out[idx, idx] -= out[idx, idx].sum() / dim
        return out

    return rhs


def _spectral_width(H) -> float:
    hm = _mat(H)
    if np.abs(hm - np.diag(np.diag(hm))).max() == 0.0:
        e = np.sort(np.diag(hm).real)
    else:
        e = np.linalg.eigvalsh(hm)
    return float(e[-1] - e[0])


def _rate_bound(H, spec: DissipatorSpec) -> float:
    """Cheap upper estimate of the generator's spectral radius, used only
    to pick a conservative default step."""
    w = _spectral_width(H) / spec.hbar
    for ch in spec.channels:
        a = np.abs(ch.matrix)
        # Schur bound on the 2-norm of A
        norm2sq = float(a.sum(axis=0).max() * a.sum(axis=1).max())
        w += 2.0 * norm2sq
    return w


def suggest_dt(H, spec: DissipatorSpec) -> float:
    """The fixed step the rk4 path would pick on its own: stability-driven,
    2.5 divided by a cheap bound on the generator's spectral radius."""
    return 2.5 / max(_rate_bound(H, spec), 1e-12)


def _expect(op: np.ndarray, y: np.ndarray) -> complex:
    return np.sum(op * y.T)


# Dormand-Prince 5(4) tableau
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_ERR = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525,
           -1 / 40)


def integrate(rho0, H, spec: DissipatorSpec, times, method: str = "rk4",
              dt: float | None = None, rtol: float = 1e-8, atol: float = 1e-10,
              observables: dict | None = None,
              record_steps: bool = False) -> Trajectory:
    """Propagate rho0 through the requested snapshot times.

    times must be strictly increasing; the first entry is the initial
    time and rho0 is recorded there unchanged. ``method`` is "rk4"
    (fixed step, ``dt`` defaulting to a conservative estimate from the
    generator's spectral radius) or "rk45" (adaptive Dormand-Prince with
    a mixed absolute/relative error target per entry).
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise ValueError("need at least two snapshot times")
    if np.any(np.diff(times) <= 0):
        raise ValueError("snapshot times must be strictly increasing")
    if method not in ("rk4", "rk45"):
        raise ValueError(f"unknown method {method!r}")
    observables = observables or {}
    obs = {name: _mat(op) for name, op in observables.items()}

    y = _mat(rho0).copy()
    rhs = _make_engine_rhs(H, spec)
    span = float(times[-1] - times[0])
    if method == "rk4":
        if dt is None:
            dt = suggest_dt(H, spec)
        if dt <= 0:
            raise ValueError("dt must be positive")
    dt_floor = 1e-13 * span

    states = [Operator(spec.space, y)]
    mon: dict = {"trace": [], "herm_defect": [], "min_eig": []}
    for name in obs:
        mon[name] = []
    step_times = [float(times[0])] if record_steps else None
    step_series: dict | None = None
    if record_steps:
        step_series = {"trace": [float(np.trace(y).real)]}
        for name, om in obs.items():
            step_series[name] = [float(_expect(om, y).real)]

    def record_snapshot(t, defect):
        states.append(Operator(spec.space, y))
        mon["trace"].append(float(np.trace(y).real))
        mon["herm_defect"].append(defect)
        mon["min_eig"].append(float(np.linalg.eigvalsh(y).min()))
        for name, om in obs.items():
            mon[name].append(float(_expect(om, y).real))

    def record_step(t):
        if not record_steps:
            return
        step_times.append(float(t))
        step_series["trace"].append(float(np.trace(y).real))
        for name, om in obs.items():
            step_series[name].append(float(_expect(om, y).real))

    # initial snapshot monitors
    mon["trace"].append(float(np.trace(y).real))
    mon["herm_defect"].append(0.0)
    mon["min_eig"].append(float(np.linalg.eigvalsh(y).min()))
    for name, om in obs.items():
        mon[name].append(float(_expect(om, y).real))

    h_adaptive = None
    k_last = None  # FSAL stage carried across accepted rk45 steps

    for seg in range(times.size - 1):
        t = float(times[seg])
        t_end = float(times[seg + 1])
        seg_defect = 0.0

        if method == "rk4":
            while t < t_end - 1e-12 * span:
                h = min(dt, t_end - t)
                k1 = rhs(y)
                k2 = rhs(y + 0.5 * h * k1)
                k3 = rhs(y + 0.5 * h * k2)
                k4 = rhs(y + h * k3)
                y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                defect = np.abs(y - y.conj().T).max()
                seg_defect = max(seg_defect, float(defect))
                y = 0.5 * (y + y.conj().T)
                t += h
                record_step(t)
        else:
            if h_adaptive is None:
                h_adaptive = min(span / 100.0,
                                 2.5 / max(_rate_bound(H, spec), 1e-12))
            while t < t_end - 1e-12 * span:
                h = min(h_adaptive, t_end - t)
                if h < dt_floor:
                    raise IntegrationFailure(
                        f"adaptive step underflow ({h:.3e}) at t = {t:.6g}",
                        t_last=t, last_state=Operator(spec.space, y))
                k = [k_last if k_last is not None else rhs(y)]
                for i in range(1, 7):
                    yi = y
                    for j, aij in enumerate(_DP_A[i]):
                        if aij != 0.0:
                            yi = yi + (h * aij) * k[j]
                    k.append(rhs(yi))
                y5 = y
                for bi, ki in zip(_DP_B5, k):
                    if bi != 0.0:
                        y5 = y5 + (h * bi) * ki
                err = np.zeros_like(y)
                for ei, ki in zip(_DP_ERR, k):
                    if ei != 0.0:
                        err = err + (h * ei) * ki
                scale = atol + rtol * max(np.abs(y).max(), np.abs(y5).max())
                enorm = float(np.abs(err).max() / scale)
                if enorm <= 1.0:
                    y = y5
                    defect = np.abs(y - y.conj().T).max()
                    seg_defect = max(seg_defect, float(defect))
                    y = 0.5 * (y + y.conj().T)
                    t += h
                    # stage 7 is the rhs at the accepted point (FSAL), but
                    # re-Hermitization perturbs y, so only reuse it when the
                    # removed defect was negligible
                    k_last = k[6] if defect < 1e-14 else None
                    record_step(t)
                else:
                    k_last = None
                factor = 0.9 * (1.0 / max(enorm, 1e-12)) ** 0.2
                h_adaptive = h * min(5.0, max(0.2, factor))

        record_snapshot(t_end, seg_defect)

    monitors = {name: np.asarray(v, dtype=float) for name, v in mon.items()}
    traj = Trajectory(times=times.copy(), states=states, monitors=monitors)
    if record_steps:
        traj.step_times = np.asarray(step_times, dtype=float)
        traj.step_series = {name: np.asarray(v, dtype=float)
                            for name, v in step_series.items()}
    return traj


# ---------------------------------------------------------------------------
# Superoperator matrix


def assemble_liouvillian(H, spec: DissipatorSpec,
                         max_side: int = MAX_SUPEROP_SIDE) -> np.ndarray:
    """Dense matrix of the generator acting on column-stacked matrices.

    Conventions: vec(A X B) = (B^T kron A) vec(X), so the unitary part is
    (i/hbar)(H^T kron 1 - 1 kron H) and each channel contributes
    conj(A) kron A - (1/2)(1 kron A^dag A + (A^dag A)^T kron 1).
    """
    hm = _mat(H)
    dim = hm.shape[0]
    side = dim * dim
    if side > max_side:
        raise ResourceLimitError(
            f"superoperator side {side} exceeds the ceiling {max_side}; "
            "reduce the truncation or raise max_side explicitly")
    eye = np.eye(dim)
    hbar = spec.hbar
    L = (1j / hbar) * (np.kron(hm.T, eye) - np.kron(eye, hm))
    for ch in spec.channels:
        a = ch.matrix
        k = a.conj().T @ a
        L += np.kron(a.conj(), a)
        L -= 0.5 * (np.kron(eye, k) + np.kron(k.T, eye))
    return L


@dataclass
class SteadyStateResult:
    eigenvalues: np.ndarray
    kernel_dim: int
    states: list = field(repr=False)
    gap: float
    max_real: float


def steady_state_analysis(H, spec: DissipatorSpec,
                          kernel_tol: float = KERNEL_TOL,
                          max_side: int = MAX_SUPEROP_SIDE) -> SteadyStateResult:
    """Full spectrum of the generator plus its kernel.

    Kernel eigenvectors are unstacked, Hermitized, and normalized to unit
    trace when their trace is away from zero (a trace-normalizable kernel
    element is a candidate stationary state); traceless kernel elements,
    which occur in degenerate kernels, are normalized in Frobenius norm
    instead. ``gap`` is the smallest decay rate outside the kernel and
    ``max_real`` the largest real part over the whole spectrum (positive
    values beyond roundoff would flag a non-contractive generator).
    """
    L = assemble_liouvillian(H, spec, max_side=max_side)
    w, v = np.linalg.eig(L)
    dim = spec.space.dim
    kernel_idx = np.nonzero(np.abs(w) <= kernel_tol)[0]
    states = []
    for i in kernel_idx:
        m = unvec(v[:, i], dim)
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if abs(tr) > 1e-8:
            m = m / tr
        else:
            m = m / np.linalg.norm(m)
        states.append(Operator(spec.space, m))
    rest = np.delete(w, kernel_idx)
    gap = float(-rest.real.max()) if rest.size else math.inf
    return SteadyStateResult(
        eigenvalues=w, kernel_dim=int(kernel_idx.size), states=states,
        gap=gap, max_real=float(w.real.max()))
