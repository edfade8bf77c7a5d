"""Quantitative certificates for the four friction criteria.

Markovianity is structural (the generator is a fixed GKLS form), and
complete positivity follows from it, so those two are certified by
construction and monitored numerically through trajectory positivity.
This module quantifies the remaining, falsifiable properties:

* translation invariance of the dissipative part,
  [p, D[rho]] - D[[p, rho]] over random states;
* strict thermalization, ||D[rho_T]||_F;
* relaxed thermalization, Tr[rho_T' D[rho_T]] over probe temperatures;
* the ground-state fidelity decay rate sum_k (<A_k^dag A_k> - |<A_k>|^2);
* the momentum-balance obstruction that forbids strict thermalization of
  kicked channels: sum_k |alpha_k|^2 sum_i (|Psi_i(p)|^2 - |Psi_i(p - dk)|^2);
* the detailed-balance witness pair R, S in the Hamiltonian eigenbasis,
  whose difference is the thermal action of the channel, together with
  the obstruction functional
  sum_{m,n} |<phi_m|phi_n>|^2 ((g_m - g_n)/2)^2, phi_m = A|m>,
  which vanishes iff A^dag A is diagonal in the eigenbasis (a necessary
  condition for a single channel to leave the Gibbs state invariant);
* Ehrenfest consistency, d<p>/dt against <i[H,p]/hbar> + <F> and the
  analogous position equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import (
    DissipatorSpec,
    _mat,
    dissipator_apply,
    friction_force,
    position_force,
)
from .hilbert import Operator, frob_norm, random_density_matrix
from .models import GroundStateSpec, thermal_state

__all__ = [
    "sample_states",
    "ti_residual",
    "therm_residual",
    "rt_probe",
    "ground_decay_rate",
    "momentum_balance_residual",
    "detailed_balance_witnesses",
    "ehrenfest_operators",
    "ehrenfest_check",
    "TIResult",
    "RTResult",
    "WitnessReport",
    "EhrenfestReport",
    "CheckResult",
    "CriteriaReport",
]


def sample_states(space, n: int, seed: int = 0, support=None):
    """Reproducible batch of random full-rank density matrices.

    ``support`` may be an explicit list of basis indices, or an integer s
    meaning every basis state whose factor levels are all below s. The
    integer form addresses the same physical states across different
    truncations, which is what convergence scans need.
    """
    rng = np.random.default_rng(seed)
    if support is not None and np.isscalar(support):
        s = int(support)
        dims = space.dims
        axes = [np.arange(min(s, d)) for d in dims]
        mesh = np.meshgrid(*axes, indexing="ij")
        support = np.ravel_multi_index([g.ravel() for g in mesh], dims)
    return [random_density_matrix(space, rng, support=support) for _ in range(n)]


@dataclass
class TIResult:
    value: float
    scale: float
    n_states: int
    per_state: np.ndarray = field(repr=False)


def ti_residual(spec: DissipatorSpec, p_ops, states=None, n_samples: int = 20,
                seed: int = 0, support=None) -> TIResult:
    """Worst translation-invariance defect of the dissipative part.

    For each sampled state and each momentum operator the residual is
    max|[p, D[rho]] - D[[p, rho]]| entrywise. ``scale`` records the
    largest entry of D[[p, rho]] seen, so callers can judge the residual
    against the size of the objects being compared.
    """
    if states is None:
        states = sample_states(spec.space, n_samples, seed=seed, support=support)
    if isinstance(p_ops, (Operator, np.ndarray)):
        p_ops = [p_ops]
    pmats = [_mat(p) for p in p_ops]
    per = []
    scale = 0.0
    for rho in states:
        rm = _mat(rho)
        drho = dissipator_apply(spec, rm)
        worst = 0.0
        for pm in pmats:
            lhs = pm @ drho - drho @ pm
            rhs = dissipator_apply(spec, pm @ rm - rm @ pm)
            worst = max(worst, float(np.abs(lhs - rhs).max()))
            scale = max(scale, float(np.abs(rhs).max()))
        per.append(worst)
    per = np.asarray(per)
    return TIResult(value=float(per.max()), scale=scale,
                    n_states=len(states), per_state=per)


def therm_residual(spec: DissipatorSpec, rho) -> float:
    """Frobenius norm of the dissipator acting on a candidate stationary
    state (zero iff the state is exactly stationary for the dissipative
    part)."""
    return frob_norm(dissipator_apply(spec, _mat(rho)))


@dataclass
class RTResult:
    residual: float
    action_norm: float
    probes: np.ndarray


def rt_probe(spec: DissipatorSpec, H, T: float, probe_temps,
             kB: float = 1.0) -> RTResult:
    """Relaxed-balance test: Tr[rho_T' D[rho_T]] over probe temperatures.

    ``action_norm`` is ||D[rho_T]||_F; a meaningful relaxed-balance
    certificate needs the residual small while the action stays finite,
    otherwise the channel is just trivial on the Gibbs state.
    """
    rho_T = thermal_state(H, T, kB=kB)
    act = dissipator_apply(spec, rho_T.matrix)
    vals = []
    for tp in probe_temps:
        probe = thermal_state(H, float(tp), kB=kB)
        vals.append(abs(complex(np.sum(probe.matrix * act.T)).real))
    vals = np.asarray(vals, dtype=float)
    return RTResult(residual=float(vals.max()), action_norm=frob_norm(act),
                    probes=vals)


def ground_decay_rate(spec: DissipatorSpec, ground) -> float:
    """Initial fidelity decay rate of a pure state under the dissipator,
    sum_k (<g|A_k^dag A_k|g> - |<g|A_k|g>|^2); zero iff the state is an
    eigenvector of every channel."""
    g = np.asarray(ground, dtype=np.complex128).reshape(-1)
    rate = 0.0
    for ch in spec.channels:
        ag = ch.matrix @ g
        rate += float(np.vdot(ag, ag).real - abs(np.vdot(g, ag)) ** 2)
    return rate


def momentum_balance_residual(gs: GroundStateSpec, channels) -> float:
    """Pointwise obstruction to strict thermalization of kicked channels.

    Evaluates max_p |sum_k |alpha_k|^2 sum_i (|Psi_i(p)|^2 -
    |Psi_i(p - hbar kappa_k)|^2)| on the grid. Channels with alpha = 0 or
    zero kick drop out identically.
    """
    n = gs.grid.points
    total = np.zeros(n, dtype=float)
    for ch in channels:
        if ch.variant != "grid-two-level":
            raise ValueError("momentum balance is defined for grid channels")
        a2 = abs(ch.alpha) ** 2
        if a2 == 0.0:
            continue
        s = ch.meta["kick_steps"]
        for psi in gs.channels:
            dens = np.abs(psi) ** 2
            total += a2 * (dens - np.roll(dens, s))
    return float(np.abs(total).max())


@dataclass
class WitnessReport:
    R: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    diff_norm: float
    obstruction: float
    weights: np.ndarray = field(repr=False)


def detailed_balance_witnesses(a, H, T: float, kB: float = 1.0) -> WitnessReport:
    """Witness pair for stationarity of the Gibbs state under one channel.

    In the eigenbasis of H, with weights g_n and phi_m = A|m>:
    R_nl = sum_m g_m <n|phi_m><phi_m|l> and
    S_nl = <phi_n|phi_l>(g_n + g_l)/2, so R - S is exactly the matrix of
    the channel dissipator applied to the Gibbs state. The obstruction
    sum_{m,n} |<phi_m|phi_n>|^2 ((g_m - g_n)/2)^2 vanishes iff the Gram
    matrix of the phi_m is diagonal wherever the weights differ, which is
    necessary for R = S.
    """
    if T <= 0:
        raise ValueError("witnesses are defined for T > 0")
    am = _mat(a)
    hm = _mat(H)
    energies, basis = np.linalg.eigh(hm)
    logw = -energies / (kB * T)
    logw -= logw.max()
    weights = np.exp(logw)
    weights /= weights.sum()
    phi = am @ basis
    overlap = basis.conj().T @ phi          # <n|phi_m>
    gram = phi.conj().T @ phi               # <phi_n|phi_m>
    R = (overlap * weights[None, :]) @ overlap.conj().T
    S = gram * (0.5 * (weights[:, None] + weights[None, :]))
    dg = 0.5 * (weights[:, None] - weights[None, :])
    obstruction = float(np.sum(np.abs(gram) ** 2 * dg ** 2))
    return WitnessReport(R=R, S=S, diff_norm=float(np.linalg.norm(R - S)),
                         obstruction=obstruction, weights=weights)


# ---------------------------------------------------------------------------
# Ehrenfest machinery

EHRENFEST_KEYS = ("p1", "p1_rhs", "x1", "x1_rhs")


def ehrenfest_operators(H, spec: DissipatorSpec, x_op, p_op) -> dict:
    """Observable set for checking the two force balance equations.

    Returns {"p1", "p1_rhs", "x1", "x1_rhs"} where the rhs operators are
    (i/hbar)[H, O] plus the friction force F (for momentum) or the
    position force X (for position). Feed these to the integrator with
    ``record_steps=True`` and hand the trajectory to ``ehrenfest_check``.
    Passing ``x_op=None`` (for models that only carry a momentum
    representation) returns the momentum pair alone.
    """
    hm = _mat(H)
    pm = _mat(p_op)
    hbar = spec.hbar
    F = friction_force(spec).matrix
    comm_p = (1j / hbar) * (hm @ pm - pm @ hm)
    out = {
        "p1": Operator(spec.space, pm),
        "p1_rhs": Operator(spec.space, comm_p + F),
    }
    if x_op is None:
        return out
    xm = _mat(x_op)
    x_wrapped = x_op if isinstance(x_op, Operator) else Operator(spec.space, xm)
    X = np.zeros_like(F)
    for ch in spec.channels:
        X += position_force(ch, x_wrapped).matrix
    comm_x = (1j / hbar) * (hm @ xm - xm @ hm)
    out["x1"] = Operator(spec.space, xm)
    out["x1_rhs"] = Operator(spec.space, comm_x + X)
    return out


@dataclass
class EhrenfestReport:
    p_defect: float
    p_scale: float
    source: str
    x_defect: float | None = None
    x_scale: float | None = None

    @property
    def p_relative(self) -> float:
        return self.p_defect / max(self.p_scale, 1e-300)

    @property
    def x_relative(self) -> float | None:
        if self.x_defect is None:
            return None
        return self.x_defect / max(self.x_scale, 1e-300)


def _derivative(series: np.ndarray, times: np.ndarray):
    """Numerical d/dt with the widest valid interior window.

    On a uniform grid a five-point fourth-order stencil is used and two
    points are trimmed at each end; otherwise np.gradient (second order
    on nonuniform spacing) with one trimmed point per end.
    """
    dt = np.diff(times)
    if dt.size >= 4 and np.abs(dt - dt[0]).max() < 1e-9 * dt[0]:
        h = dt[0]
        d = (series[:-4] - 8.0 * series[1:-3] + 8.0 * series[3:-1]
             - series[4:]) / (12.0 * h)
        return d, slice(2, -2)
    return np.gradient(series, times)[1:-1], slice(1, -1)


def ehrenfest_check(traj, keys=EHRENFEST_KEYS) -> EhrenfestReport:
    """Compare numerical d<O>/dt against the recorded rhs expectations.

    Uses the dense per-step series when the trajectory carries one,
    otherwise the snapshot monitors. ``keys`` holds (value, rhs) name
    pairs flattened; pass just the first two for a momentum-only check.
    """
    if len(keys) not in (2, 4):
        raise ValueError("keys must hold one or two (value, rhs) pairs")
    if traj.step_series is not None:
        times, series, source = traj.step_times, traj.step_series, "steps"
    else:
        times, series, source = traj.times, traj.monitors, "snapshots"
    for k in keys:
        if k not in series:
            raise KeyError(f"trajectory does not carry the series {k!r}; "
                           "integrate with the ehrenfest_operators observables")
    out = []
    for val_key, rhs_key in zip(keys[::2], keys[1::2]):
        deriv, inner = _derivative(np.asarray(series[val_key]), times)
        rhs = np.asarray(series[rhs_key])[inner]
        defect = float(np.abs(deriv - rhs).max())
        scale = float(max(np.abs(rhs).max(), np.abs(deriv).max()))
        out.append((defect, scale))
    rep = EhrenfestReport(p_defect=out[0][0], p_scale=out[0][1], source=source)
    if len(out) == 2:
        rep.x_defect, rep.x_scale = out[1]
    return rep


# ---------------------------------------------------------------------------
# Report container


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    samples: int = 0
    note: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value,
                "tolerance": self.tolerance, "passed": bool(self.passed),
                "samples": self.samples, "note": self.note}


@dataclass
class CriteriaReport:
    checks: list
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "meta": self.meta,
                "checks": [c.to_dict() for c in self.checks]}

    def table(self) -> str:
        rows = [("check", "value", "tolerance", "status", "note")]
        for c in self.checks:
            rows.append((c.name, f"{c.value:.6e}", f"{c.tolerance:.1e}",
                         "PASS" if c.passed else "FAIL", c.note))
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        lines = []
        for j, r in enumerate(rows):
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
            if j == 0:
                lines.append("  ".join("-" * w for w in widths))
        verdict = "ALL CHECKS PASSED" if self.passed else "CHECK FAILURES PRESENT"
        lines.append("")
        lines.append(verdict)
        return "\n".join(lines)
