"""Construction of translation-invariant friction channels.

Every jump operator built here has the translation-covariant form

    A = exp(-i kappa x1) f

with f independent of the external position x1, so that the dissipator
commutes with momentum translations: [p1, D[rho]] = D[[p1, rho]]. Each
channel stores both the assembled matrix A and the factor f (stripping
the position exponential numerically after the fact is ill conditioned),
and the stored pair feeds the Ehrenfest force operators

    friction force   F = -sum_k hbar kappa_k f_k^dag f_k
    position force   X = (i hbar / 2) sum_k (f^dag df/dp - df^dag/dp f).

Oscillator channels: the zero-temperature family

    A = exp(-i kappa x1) G' b2 + alpha exp(-i hbar kappa b1 / sqrt(m1))

annihilates the joint vacuum up to the factor alpha (b1, b2 are the
vacuum annihilators of the model); with alpha = 0 the vacuum is an exact
stationary state of the dissipator. The finite-temperature variant

    A = exp(-i kappa x1) exp(hbar kappa (b2' l2 p2' sin + b1' l1 p1' cos)/sqrt(m1)),
    l_l = tanh(hbar omega_l / (4 kB T))

does not annihilate the Gibbs state (no single channel of this form can,
at T > 0) but satisfies the relaxed balance Tr[rho_T' D[rho_T]] = 0 for
every probe temperature T'.

Grid channels: on a two-channel internal space over a momentum grid the
position exponential is realized as an exactly unitary cyclic shift
(hbar*kappa must be an integral number of grid steps) and

    f = f0 + alpha * diag_i Psi_i(p - hbar kappa)/Psi_i(p),
    f0 blocks (u,v):  (-1)^(u-v) G_u(p) Psi_{1-u}*(p) Psi_{1-v}(p),

where f0 annihilates the ground state identically (the two terms cancel
pointwise) and the ratio term makes the ground state an eigenvector of A
with eigenvalue alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError
from .hilbert import (
    HilbertSpace,
    InternalLevels,
    MomentumGrid,
    Operator,
    grid_operators,
    make_space,
    matrix_exponential,
)
from .models import (
    GroundStateSpec,
    OscillatorModel,
    normal_mode_ops,
    vacuum_annihilators,
)

__all__ = [
    "FrictionChannel",
    "DissipatorSpec",
    "lindblad_apply",
    "dissipator_apply",
    "liouvillian_rhs",
    "g_operator",
    "build_osc_channel",
    "build_osc_finite_T_channel",
    "build_grid_channel",
    "build_lowering_channel",
    "friction_force",
    "position_force",
]

# Grid points where a channel wavefunction is below DEAD_FLOOR (relative
# to its peak) are treated as outside its support: the ratio factor there
# is a free function and is set to zero, unless the shifted numerator is
# alive (above NEGLIGIBLE_NUM), in which case the kick transports weight
# onto a dead zone and the eigenvector condition is unsatisfiable. Away
# from dead zones the division is well conditioned at any representable
# magnitude; RATIO_CEILING only rejects constructions whose dynamic range
# would poison the dissipator norm.
DEAD_FLOOR = 1e-14
NEGLIGIBLE_NUM = 1e-12
RATIO_CEILING = 1e10

VARIANTS = ("osc-zero-T", "osc-alpha", "osc-finite-T-RT", "grid-two-level")


@dataclass(frozen=True)
class FrictionChannel:
    """One jump operator A = exp(-i kappa x1) f with its stored factor f."""

    space: HilbertSpace
    variant: str
    kappa: float
    alpha: complex
    matrix: np.ndarray = field(repr=False)
    f_matrix: np.ndarray = field(repr=False)
    hbar: float = 1.0
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for name in ("matrix", "f_matrix"):
            m = np.asarray(getattr(self, name), dtype=np.complex128)
            if m.shape != (self.space.dim, self.space.dim):
                raise ValueError(f"{name} shape {m.shape} does not match space")
            m = m.copy()
            m.setflags(write=False)
            object.__setattr__(self, name, m)

    @property
    def operator(self) -> Operator:
        return Operator(self.space, self.matrix)


@dataclass(frozen=True)
class DissipatorSpec:
    """A nonempty family of channels on one space (plus hbar for the engine)."""

    space: HilbertSpace
    channels: tuple
    hbar: float = 1.0

    def __post_init__(self):
        if len(self.channels) == 0:
            raise ValueError("a dissipator needs at least one channel; "
                             "use a zero-amplitude channel for closed evolution")
        for ch in self.channels:
            if ch.space != self.space:
                raise ValueError("all channels must live on the spec's space")
        object.__setattr__(self, "channels", tuple(self.channels))


def _mat(x):
    return x.matrix if isinstance(x, Operator) else np.asarray(x, dtype=np.complex128)


def lindblad_apply(a, rho):
    """Single-channel dissipator action A rho A^dag - (1/2){A^dag A, rho}."""
    wrap = isinstance(rho, Operator)
    am = _mat(a)
    rm = _mat(rho)
    adag = am.conj().T
    k = adag @ am
    out = am @ rm @ adag - 0.5 * (k @ rm + rm @ k)
    if wrap:
        space = rho.space if isinstance(rho, Operator) else a.space
        return Operator(space, out)
    return out


def dissipator_apply(spec: DissipatorSpec, rho):
    """Sum of the channel dissipators (no Hamiltonian part)."""
    wrap = isinstance(rho, Operator)
    rm = _mat(rho)
    out = np.zeros_like(rm)
    for ch in spec.channels:
        out += lindblad_apply(ch.matrix, rm)
    return Operator(spec.space, out) if wrap else out


def liouvillian_rhs(rho, H, spec: DissipatorSpec):
    """Full generator action (i/hbar)[rho, H] + sum_k D_k[rho].

    Valid for arbitrary (not necessarily Hermitian) matrices, which is what
    the superoperator-matrix cross-checks rely on.
    """
    wrap = isinstance(rho, Operator)
    rm = _mat(rho)
    hm = _mat(H)
    out = (1j / spec.hbar) * (rm @ hm - hm @ rm)
    for ch in spec.channels:
        out += lindblad_apply(ch.matrix, rm)
    return Operator(spec.space, out) if wrap else out


# ---------------------------------------------------------------------------
# Oscillator channels

_G_FACTORS = ("p1", "p2", "x2", "p1p", "p2p")
_G_FORBIDDEN = ("x1", "x1p", "x2p")


def g_operator(model: OscillatorModel, space: HilbertSpace, spec) -> np.ndarray:
    """Build the channel prefactor G' from a scalar or a product-sum spec.

    A scalar g means g times the identity. A dict spec
    ``{"terms": [{"coeff": c, "factors": ["p1", "x2", ...]}]}`` sums
    products of the labeled building blocks. Only operators independent of
    the external position are allowed; any x1-bearing label is rejected,
    which keeps the assembled channel translation covariant.
    """
    if np.isscalar(spec):
        return complex(spec) * np.eye(space.dim, dtype=np.complex128)
    if not isinstance(spec, dict) or "terms" not in spec:
        raise ValueError("G' spec must be a scalar or a {'terms': [...]} mapping")
    ops = normal_mode_ops(model, space)
    blocks = {
        "p1": ops.p1.matrix, "p2": ops.p2.matrix, "x2": ops.x2.matrix,
        "p1p": ops.mode1.p.matrix, "p2p": ops.mode2.p.matrix,
    }
    out = np.zeros((space.dim, space.dim), dtype=np.complex128)
    for t, term in enumerate(spec["terms"]):
        coeff = complex(term.get("coeff", 1.0))
        prod = coeff * np.eye(space.dim, dtype=np.complex128)
        for label in term.get("factors", []):
            if label in _G_FORBIDDEN:
                raise ValueError(
                    f"term {t}: factor '{label}' depends on the external position x1, "
                    "which breaks translation invariance of the channel")
            if label not in blocks:
                raise ValueError(f"term {t}: unknown G' factor '{label}' "
                                 f"(allowed: {', '.join(_G_FACTORS)})")
            prod = prod @ blocks[label]
        out += prod
    return out


def build_osc_channel(model: OscillatorModel, space: HilbertSpace, kappa: float,
                      alpha: complex = 0.0, gprime=1.0) -> FrictionChannel:
    """Zero-temperature oscillator channel; alpha != 0 trades exact ground
    stationarity for the relaxed balance only.

    The assembled matrix follows the literal operator expression, in which
    the alpha term is a single exponential of the vacuum annihilator b1 and
    therefore fixes A|0> = alpha|0> exactly even in the truncated space.
    The stored factor f carries the equivalent momentum-space form
    f_alpha = N exp(hbar kappa (c^2 b1' p1' + ... )/sqrt(m1)) obtained by
    splitting off exp(-i kappa x1); the split is exact up to a scalar
    because the two exponents commute into a number.
    """
    alpha = complex(alpha)
    ops = normal_mode_ops(model, space)
    frak1, frak2 = vacuum_annihilators(model, space)
    gp = g_operator(model, space, gprime)
    hbar = model.hbar
    c, s = math.cos(model.theta), math.sin(model.theta)
    b1, b2 = model.betas
    sm1 = math.sqrt(model.m1)

    u_kick = matrix_exponential(-1j * kappa * ops.x1.matrix)
    damped = gp @ frak2.matrix
    a_mat = u_kick @ damped
    f_mat = damped.copy()
    if alpha != 0:
        a_mat = a_mat + alpha * matrix_exponential(
            (-1j * hbar * kappa / sm1) * frak1.matrix)
        pi = c * b1 * ops.mode1.p.matrix + s * b2 * ops.mode2.p.matrix
        scal = math.exp(-(hbar * kappa) ** 2 * (c * c * b1 + s * s * b2) / (2 * model.m1))
        f_mat = f_mat + (alpha * scal) * matrix_exponential((hbar * kappa / sm1) * pi)

    variant = "osc-zero-T" if alpha == 0 else "osc-alpha"
    return FrictionChannel(space=space, variant=variant, kappa=float(kappa),
                           alpha=alpha, matrix=a_mat, f_matrix=f_mat,
                           hbar=hbar, meta={"model": model, "gprime": gprime})


def build_osc_finite_T_channel(model: OscillatorModel, space: HilbertSpace,
                               kappa: float, T: float) -> FrictionChannel:
    """Finite-temperature channel satisfying the relaxed balance at T.

    Built as the product of the two exponentials in the order written:
    the position kick first, then the Gibbs-weighted momentum exponential
    with lambda_l = tanh(hbar omega_l/(4 kB T)).
    """
    if T <= 0:
        raise ValueError("the relaxed-balance channel needs T > 0; "
                         "use build_osc_channel for the cold environment")
    ops = normal_mode_ops(model, space)
    hbar, kB = model.hbar, model.kB
    lam1 = math.tanh(hbar * model.omega1 / (4.0 * kB * T))
    lam2 = math.tanh(hbar * model.omega2 / (4.0 * kB * T))
    c, s = math.cos(model.theta), math.sin(model.theta)
    b1, b2 = model.betas
    sm1 = math.sqrt(model.m1)

    u_kick = matrix_exponential(-1j * kappa * ops.x1.matrix)
    expo = (hbar * kappa / sm1) * (b2 * lam2 * s * ops.mode2.p.matrix
                                   + b1 * lam1 * c * ops.mode1.p.matrix)
    f_mat = matrix_exponential(expo)
    return FrictionChannel(space=space, variant="osc-finite-T-RT",
                           kappa=float(kappa), alpha=0.0,
                           matrix=u_kick @ f_mat, f_matrix=f_mat, hbar=hbar,
                           meta={"model": model, "T": float(T),
                                 "lambdas": (lam1, lam2)})


# ---------------------------------------------------------------------------
# Grid channel


def _kick_steps(grid: MomentumGrid, kappa: float, hbar: float) -> int:
    steps = hbar * kappa / grid.dp
    s = round(steps)
    if abs(steps - s) > 1e-9 * max(1.0, abs(steps)):
        nearest = s * grid.dp / hbar
        raise ValueError(
            f"hbar*kappa = {hbar * kappa!r} is not an integral number of grid steps "
            f"(dp = {grid.dp!r}); nearest representable kappa is {nearest!r}")
    return int(s)


def build_grid_channel(gs: GroundStateSpec, kappa: float, alpha: complex = 0.0,
                       G0=None, G1=None, hbar: float = 1.0) -> FrictionChannel:
    """Two-internal-channel grid jump operator with exact cancellation on
    the ground state.

    ``G0``/``G1`` are optional momentum-sampled gain profiles (default one).
    The kick must be an integral number of grid steps so the position
    exponential is an exact cyclic permutation. For alpha != 0 the ratio
    Psi_i(p - hbar kappa)/Psi_i(p) is set to zero outside the channel's
    support (a free choice there) and fails loudly when the kick moves
    weight onto a dead zone or the ratio's dynamic range explodes.
    """
    if gs.n_channels != 2:
        raise ValueError("the grid channel construction is specific to two "
                         f"internal channels, got {gs.n_channels}")
    alpha = complex(alpha)
    grid = gs.grid
    n = grid.points
    s_steps = _kick_steps(grid, kappa, hbar)

    gains = []
    for tag, g in (("G0", G0), ("G1", G1)):
        if g is None:
            gains.append(np.ones(n, dtype=np.complex128))
        else:
            arr = np.asarray(g, dtype=np.complex128).reshape(-1)
            if arr.shape != (n,):
                raise ValueError(f"{tag} must be sampled on the {n}-point grid")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{tag} contains non-finite samples")
            gains.append(arr)

    psi = gs.channels
    # f0 blocks (u, v): (-1)^(u-v) G_u Psi_{1-u}^* Psi_{1-v}, diagonal in p.
    fdiag = np.zeros((2, 2, n), dtype=np.complex128)
    for u in range(2):
        for v in range(2):
            sign = -1.0 if (u - v) % 2 else 1.0
            fdiag[u, v] = sign * gains[u] * np.conj(psi[1 - u]) * psi[1 - v]

    if alpha != 0:
        for i in range(2):
            if s_steps == 0:
                fdiag[i, i] += alpha
                continue
            num = np.roll(psi[i], s_steps)
            den = psi[i]
            scale = np.abs(den).max()
            dead = np.abs(den) < DEAD_FLOOR * scale
            alive_num = np.abs(num) > NEGLIGIBLE_NUM * scale
            bad = dead & alive_num
            if np.any(bad):
                pts = np.nonzero(bad)[0][:8]
                raise DegenerateInputError(
                    f"channel {i}: the kick moves weight onto grid points "
                    f"{pts.tolist()} where the wavefunction vanishes; no "
                    "momentum-diagonal factor can hold the ground state there")
            ratio = np.zeros(n, dtype=np.complex128)
            ok = ~dead
            ratio[ok] = num[ok] / den[ok]
            peak = np.abs(ratio).max()
            if peak > RATIO_CEILING:
                raise DegenerateInputError(
                    f"channel {i}: ratio factor reaches {peak:.3e}; shrink the "
                    "grid or the kick, such dynamic range swamps the dissipator")
            fdiag[i, i] += alpha * ratio

    f_mat = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    for u in range(2):
        for v in range(2):
            f_mat[u * n:(u + 1) * n, v * n:(v + 1) * n] = np.diag(fdiag[u, v])

    space = make_space(InternalLevels(2), grid)
    gops = grid_operators(space, 1)
    u_kick = gops.shift(-s_steps).matrix
    return FrictionChannel(space=space, variant="grid-two-level",
                           kappa=float(kappa), alpha=alpha,
                           matrix=u_kick @ f_mat, f_matrix=f_mat, hbar=hbar,
                           meta={"gs": gs, "kick_steps": s_steps})


def build_lowering_channel(model: OscillatorModel, space: HilbertSpace,
                           mode: int, strength: float = 1.0) -> FrictionChannel:
    """Plain normal-mode lowering operator as a jump operator.

    This is the textbook optical damping channel. It is deliberately NOT
    of the kicked translation-covariant form: it fails the translation
    invariance test and does not leave a finite-temperature Gibbs state
    stationary, which makes it the bundled negative control.
    """
    if mode not in (1, 2):
        raise ValueError("mode must be 1 or 2")
    ops = normal_mode_ops(model, space)
    a = (ops.mode1 if mode == 1 else ops.mode2).a.matrix * float(strength)
    return FrictionChannel(space=space, variant="lowering-control",
                           kappa=0.0, alpha=0.0, matrix=a, f_matrix=a,
                           hbar=model.hbar, meta={"mode": mode,
                                                  "strength": float(strength)})


# ---------------------------------------------------------------------------
# Ehrenfest force operators


def friction_force(spec: DissipatorSpec) -> Operator:
    """F = -sum_k hbar kappa_k f_k^dag f_k (Hermitian, negative semidefinite
    for positive kicks)."""
    out = np.zeros((spec.space.dim, spec.space.dim), dtype=np.complex128)
    for ch in spec.channels:
        out -= spec.hbar * ch.kappa * (ch.f_matrix.conj().T @ ch.f_matrix)
    return Operator(spec.space, out)


def _grid_f_blocks(ch: FrictionChannel):
    grid = ch.space.factors[1]
    n = grid.points
    f4 = ch.f_matrix.reshape(2, n, 2, n)
    offdiag = 0.0
    blocks = np.empty((2, 2, n), dtype=np.complex128)
    for u in range(2):
        for v in range(2):
            blk = f4[u, :, v, :]
            blocks[u, v] = np.diag(blk)
            offdiag = max(offdiag, np.abs(blk - np.diag(np.diag(blk))).max())
    if offdiag > 1e-12:
        raise ValueError("grid channel factor is not diagonal in momentum")
    return grid, blocks


def position_force(ch: FrictionChannel, x1: Operator | None = None) -> Operator:
    """X = (i hbar/2)(f^dag df/dp - df^dag/dp f) for a single channel.

    Grid channels differentiate the momentum-diagonal factor with centered
    differences (one sided at the edges); for a real factor the two terms
    cancel exactly. Oscillator channels use df/dp1 = [x1, f]/(i hbar), so
    the lab-frame position operator must be supplied.
    """
    hbar = ch.hbar
    if ch.variant == "grid-two-level":
        grid, blocks = _grid_f_blocks(ch)
        dblocks = np.gradient(blocks, grid.dp, axis=2)
        n = grid.points
        xblocks = np.zeros((2, 2, n), dtype=np.complex128)
        for u in range(2):
            for v in range(2):
                for w in range(2):
                    xblocks[u, v] += (np.conj(blocks[w, u]) * dblocks[w, v]
                                      - np.conj(dblocks[w, u]) * blocks[w, v])
        xblocks *= 0.5j * hbar
        out = np.zeros((2 * n, 2 * n), dtype=np.complex128)
        for u in range(2):
            for v in range(2):
                out[u * n:(u + 1) * n, v * n:(v + 1) * n] = np.diag(xblocks[u, v])
        return Operator(ch.space, out)
    if x1 is None:
        raise ValueError("oscillator channels need the lab position operator x1")
    f = ch.f_matrix
    df = (x1.matrix @ f - f @ x1.matrix) / (1j * hbar)
    out = 0.5j * hbar * (f.conj().T @ df - df.conj().T @ f)
    return Operator(ch.space, out)
