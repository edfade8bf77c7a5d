"""Model construction: the trapped two-mode oscillator and the synthetic
momentum-grid model.

The oscillator describes a particle of mass m1 in a harmonic trap carrying
one internal vibrational coordinate of mass m2. In mass-weighted
coordinates the quadratic potential is diagonalized by a rotation of angle
theta, and the Hamiltonian becomes a pair of independent normal modes,
H = sum_l hbar*omega_l*a'_l^dag a'_l (zero point energy dropped). The lab
operators are recovered from the primed (normal) ones through

    x1 = (cos(th) x1' + sin(th) x2')/sqrt(m1)
    x2 = (-sin(th) x1' + cos(th) x2')/sqrt(m2)
    p1 = sqrt(m1) (cos(th) p1' + sin(th) p2')
    p2 = sqrt(m2) (-sin(th) p1' + cos(th) p2')

The grid model instead fixes the joint ground state directly as a list of
internal-channel momentum wavefunctions on a uniform grid and completes it
with a synthetic positive spectrum, which gives full control over the
ground-state structure the dissipator builders rely on.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .hilbert import (
    BosonMode,
    DensityMatrix,
    HilbertSpace,
    InternalLevels,
    ModeOperators,
    MomentumGrid,
    Operator,
    make_space,
    matrix_exponential,
    mode_operators,
)

__all__ = [
    "OscillatorModel",
    "physical_to_normal",
    "mass_weighted_stiffness",
    "model_stiffness",
    "oscillator_space",
    "OscillatorOps",
    "normal_mode_ops",
    "build_hamiltonian",
    "vacuum_annihilators",
    "ground_ket",
    "displaced_ket",
    "thermal_state",
    "GroundStateSpec",
    "make_ground_spec",
    "gaussian_ground_spec",
    "ground_state_vector",
    "GridModel",
    "grid_model",
]

DEGENERACY_RTOL = 1e-12


@dataclass(frozen=True)
class OscillatorModel:
    """Normal-mode description of the trapped oscillator with one internal mode.

    omega1 <= omega2 are the normal frequencies, theta the mass-weighted
    rotation angle in (-pi/2, pi/2], and m1, m2 the kinetic masses of the
    external (trap) and internal (vibration) coordinates.
    """

    omega1: float
    omega2: float
    theta: float
    m1: float = 1.0
    m2: float = 1.0
    hbar: float = 1.0
    kB: float = 1.0

    def __post_init__(self):
        if self.omega1 <= 0 or self.omega2 <= 0:
            raise ValueError("normal frequencies must be positive")
        if self.m1 <= 0 or self.m2 <= 0:
            raise ValueError("masses must be positive")
        if self.hbar <= 0 or self.kB <= 0:
            raise ValueError("hbar and kB must be positive")
        if not -math.pi < self.theta <= math.pi:
            raise ValueError("theta must lie in (-pi, pi]")

    @property
    def betas(self) -> tuple:
        return (1.0 / (self.hbar * self.omega1), 1.0 / (self.hbar * self.omega2))


def mass_weighted_stiffness(M: float, mu: float, m1: float,
                            omega_trap: float, k_vib: float) -> np.ndarray:
    """Stiffness matrix in mass-weighted coordinates (sqrt(M)x1, sqrt(mu)x2).

    The trap potential (M omega_trap^2/2)(x1 - (mu/m1) x2)^2 couples the
    coordinates; the vibration adds (k_vib/2) x2^2.
    """
    r = mu / m1
    k = np.empty((2, 2))
    k[0, 0] = omega_trap ** 2
    k[0, 1] = k[1, 0] = -omega_trap ** 2 * r * math.sqrt(M / mu)
    k[1, 1] = M * omega_trap ** 2 * r ** 2 / mu + k_vib / mu
    return k


def model_stiffness(model: OscillatorModel) -> np.ndarray:
    """Rebuild the mass-weighted stiffness matrix from (omega1, omega2, theta)."""
    c, s = math.cos(model.theta), math.sin(model.theta)
    rot = np.array([[c, -s], [s, c]])
    return rot.T @ np.diag([model.omega1 ** 2, model.omega2 ** 2]) @ rot


def physical_to_normal(M: float, mu: float, m1: float, omega_trap: float,
                       k_vib: float, hbar: float = 1.0,
                       kB: float = 1.0) -> OscillatorModel:
    """Numerical normal-mode analysis of the physical trap parameters.

    Frequencies come out sorted ascending; the rotation angle is
    canonicalized to (-pi/2, pi/2] (the remaining sign freedom only flips
    both normal coordinates at once). Degenerate frequencies force a
    diagonal stiffness, which is resolved as theta = 0.
    """
    for name, val in (("M", M), ("mu", mu), ("m1", m1),
                      ("omega_trap", omega_trap), ("k_vib", k_vib)):
        if val <= 0:
            raise ValueError(f"{name} must be positive, got {val}")
    k = mass_weighted_stiffness(M, mu, m1, omega_trap, k_vib)
    w2, vec = np.linalg.eigh(k)
    if w2[0] <= 0:
        raise ValueError("stiffness matrix is not positive definite")
    scale = abs(w2).max()
    if abs(w2[1] - w2[0]) <= DEGENERACY_RTOL * scale:
        theta = 0.0
    else:
        if np.linalg.det(vec) < 0:
            vec = vec.copy()
            vec[:, 1] = -vec[:, 1]
        theta = math.atan2(vec[0, 1], vec[0, 0])
        if theta > math.pi / 2:
            theta -= math.pi
        elif theta <= -math.pi / 2:
            theta += math.pi
    w = np.sqrt(w2)
    return OscillatorModel(omega1=float(w[0]), omega2=float(w[1]), theta=theta,
                           m1=M, m2=mu, hbar=hbar, kB=kB)


def oscillator_space(truncation) -> HilbertSpace:
    n1, n2 = (int(truncation), int(truncation)) if np.isscalar(truncation) \
        else (int(truncation[0]), int(truncation[1]))
    return make_space(BosonMode(n1), BosonMode(n2))


@dataclass(frozen=True)
class OscillatorOps:
    """Normal-mode ladder/quadrature operators plus the lab-frame ones."""

    mode1: ModeOperators
    mode2: ModeOperators
    x1: Operator
    x2: Operator
    p1: Operator
    p2: Operator


def normal_mode_ops(model: OscillatorModel, space: HilbertSpace) -> OscillatorOps:
    b1, b2 = model.betas
    m1ops = mode_operators(space, 0, b1, model.hbar)
    m2ops = mode_operators(space, 1, b2, model.hbar)
    c, s = math.cos(model.theta), math.sin(model.theta)
    sm1, sm2 = math.sqrt(model.m1), math.sqrt(model.m2)
    x1 = (1.0 / sm1) * (c * m1ops.x + s * m2ops.x)
    x2 = (1.0 / sm2) * (-s * m1ops.x + c * m2ops.x)
    p1 = sm1 * (c * m1ops.p + s * m2ops.p)
    p2 = sm2 * (-s * m1ops.p + c * m2ops.p)
    return OscillatorOps(mode1=m1ops, mode2=m2ops, x1=x1, x2=x2, p1=p1, p2=p2)


def build_hamiltonian(model: OscillatorModel, space: HilbertSpace) -> Operator:
    """Diagonal normal-mode Hamiltonian, zero-point energy dropped."""
    n1, n2 = space.dims
    e = np.add.outer(model.hbar * model.omega1 * np.arange(n1),
                     model.hbar * model.omega2 * np.arange(n2)).ravel()
    return Operator(space, np.diag(e.astype(np.complex128)))


def vacuum_annihilators(model: OscillatorModel, space: HilbertSpace):
    """The two annihilator combinations that kill the joint ground state.

    b1 mixes in the external position (it generates the momentum-kick term
    of the dissipator); b2 depends only on (x2, p1, p2) and is the damped
    combination. At theta = 0 they reduce to the bare normal-mode ladders.
    """
    ops = normal_mode_ops(model, space)
    b1, b2 = model.betas
    c, s = math.cos(model.theta), math.sin(model.theta)
    r1, r2 = math.sqrt(2 * b1), math.sqrt(2 * b2)
    frak1 = (r2 * s) * ops.mode2.a + (r1 * c) * ops.mode1.a
    frak2 = (r2 * c) * ops.mode2.a - (r1 * s) * ops.mode1.a
    return frak1, frak2


def ground_ket(space: HilbertSpace) -> np.ndarray:
    v = np.zeros(space.dim, dtype=np.complex128)
    v[0] = 1.0
    return v


def displaced_ket(model: OscillatorModel, space: HilbertSpace, mode: int,
                  amount: complex) -> np.ndarray:
    """Coherent displacement of one normal mode applied to the vacuum."""
    if mode not in (1, 2):
        raise ValueError("mode must be 1 or 2")
    ops = normal_mode_ops(model, space)
    a = ops.mode1.a if mode == 1 else ops.mode2.a
    d = complex(amount)
    gen = d * a.dag().matrix - np.conj(d) * a.matrix
    return matrix_exponential(gen) @ ground_ket(space)


def thermal_state(H: Operator, T: float, kB: float = 1.0) -> DensityMatrix:
    """Gibbs state exp(-H/(kB T))/Z; T = 0 projects on the ground space.

    A degenerate ground space at T = 0 yields the equal-weight projector
    and emits a warning, since the zero-temperature limit is then not
    unique.
    """
    if T < 0:
        raise ValueError("temperature must be nonnegative")
    w, v = np.linalg.eigh(H.matrix)
    if T == 0:
        scale = max(1.0, abs(w[-1] - w[0]))
        sel = w - w[0] <= 1e-12 * scale
        mult = int(sel.sum())
        if mult > 1:
            warnings.warn(f"ground space is {mult}-fold degenerate; "
                          "returning the equal-weight projector", stacklevel=2)
        vg = v[:, sel]
        return DensityMatrix(H.space, (vg @ vg.conj().T) / mult)
    weights = np.exp(-(w - w[0]) / (kB * T))
    weights /= weights.sum()
    return DensityMatrix(H.space, (v * weights) @ v.conj().T)


# ---------------------------------------------------------------------------
# Momentum-grid model


@dataclass(frozen=True)
class GroundStateSpec:
    """Joint ground state given as internal-channel momentum wavefunctions.

    ``channels[i, j]`` is Psi_i(p_j) on the shared grid; the combined norm
    sum_ij |Psi_i(p_j)|^2 dp equals one.
    """

    grid: MomentumGrid
    channels: np.ndarray = field(repr=False)

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]


def make_ground_spec(grid: MomentumGrid, channels) -> GroundStateSpec:
    """Validate channel wavefunctions and assemble a :class:`GroundStateSpec`.

    Checks: finite entries, no identically-zero channel, combined norm one
    within 1e-10, pairwise non-adiabaticity (no two channels may be
    parallel within 1e-6), and decay below 1e-12 at both outermost grid
    points so that cyclic shifts cannot wrap tail amplitude around.
    """
    psi = np.asarray(channels, dtype=np.complex128)
    if psi.ndim != 2 or psi.shape[1] != grid.points:
        raise ValueError(
            f"channels must have shape (n_channels, {grid.points}), got {psi.shape}")
    if psi.shape[0] < 1:
        raise ValueError("at least one channel wavefunction is required")
    if not np.all(np.isfinite(psi)):
        raise ValueError("channel wavefunctions contain non-finite entries")
    norms2 = np.sum(np.abs(psi) ** 2, axis=1) * grid.dp
    if np.any(norms2 <= 1e-24):
        bad = [int(i) for i in np.nonzero(norms2 <= 1e-24)[0]]
        raise ValueError(f"channel(s) {bad} are identically zero")
    total = norms2.sum()
    if abs(total - 1.0) > 1e-10:
        raise ValueError(f"combined norm is {total!r}, expected 1 within 1e-10")
    for i in range(psi.shape[0]):
        for j in range(i + 1, psi.shape[0]):
            ov2 = abs(np.vdot(psi[i], psi[j])) ** 2
            bound = (1.0 - 1e-6) * np.vdot(psi[i], psi[i]).real * np.vdot(psi[j], psi[j]).real
            if ov2 >= bound:
                raise ValueError(
                    f"channels {i} and {j} are adiabatically parallel; "
                    "the dissipator construction needs distinct channel shapes")
    edge = np.abs(psi[:, [0, -1]])
    if np.any(edge >= 1e-12):
        raise ValueError(
            "channel wavefunctions must fall below 1e-12 at the outermost "
            f"grid points (found max edge value {edge.max():.3e})")
    psi = psi.copy()
    psi.setflags(write=False)
    return GroundStateSpec(grid=grid, channels=psi)


def gaussian_ground_spec(grid: MomentumGrid, sigmas, centers=None,
                         weights=None) -> GroundStateSpec:
    """Convenience builder: jointly normalized Gaussian channel profiles."""
    sigmas = np.atleast_1d(np.asarray(sigmas, dtype=float))
    n = sigmas.size
    centers = np.zeros(n) if centers is None else np.atleast_1d(np.asarray(centers, float))
    weights = np.ones(n) if weights is None else np.atleast_1d(np.asarray(weights, float))
    if centers.size != n or weights.size != n:
        raise ValueError("sigmas, centers, weights must have matching lengths")
    p = grid.momenta
    psi = np.empty((n, grid.points), dtype=np.complex128)
    for i in range(n):
        raw = np.exp(-((p - centers[i]) ** 2) / (4.0 * sigmas[i] ** 2))
        raw /= math.sqrt(np.sum(np.abs(raw) ** 2) * grid.dp)
        psi[i] = weights[i] * raw
    psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * grid.dp)
    return make_ground_spec(grid, psi)


def ground_state_vector(gs: GroundStateSpec) -> np.ndarray:
    """Unit ket on (internal ⊗ grid): components Psi_i(p_j) sqrt(dp)."""
    v = (gs.channels * math.sqrt(gs.grid.dp)).ravel()
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class GridModel:
    space: HilbertSpace
    H: Operator
    ground: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)


def grid_model(gs: GroundStateSpec, level_gaps=1.0) -> GridModel:
    """Synthetic Hamiltonian with the supplied ground state at energy zero.

    The rest of the spectrum lives on a deterministic orthonormal
    completion of the ground vector (Gram-Schmidt over the canonical
    basis) with strictly positive level energies built from ``level_gaps``
    (a scalar gap g gives the ladder E_n = n*g; a sequence of dim-1
    positive gaps is accumulated).
    """
    space = make_space(InternalLevels(gs.n_channels), gs.grid)
    dim = space.dim
    g0 = ground_state_vector(gs)
    if np.isscalar(level_gaps):
        if level_gaps <= 0:
            raise ValueError("spectrum gap must be positive")
        energies = float(level_gaps) * np.arange(1, dim)
    else:
        gaps = np.asarray(level_gaps, dtype=float)
        if gaps.shape != (dim - 1,):
            raise ValueError(f"need {dim - 1} gaps, got shape {gaps.shape}")
        if np.any(gaps <= 0):
            raise ValueError("all spectrum gaps must be positive")
        energies = np.cumsum(gaps)

    basis = np.empty((dim, dim), dtype=np.complex128)
    basis[:, 0] = g0
    have = 1
    for k in range(dim):
        if have == dim:
            break
        v = np.zeros(dim, dtype=np.complex128)
        v[k] = 1.0
        for _ in range(2):  # second pass keeps orthogonality at machine level
            v -= basis[:, :have] @ (basis[:, :have].conj().T @ v)
        nrm = np.linalg.norm(v)
        if nrm > 1e-8:
            basis[:, have] = v / nrm
            have += 1
    if have != dim:
        raise ValueError("failed to complete an orthonormal basis around the ground state")
    excited = basis[:, 1:]
    h = (excited * energies) @ excited.conj().T
    h = 0.5 * (h + h.conj().T)
    return GridModel(space=space, H=Operator(space, h), ground=g0, energies=energies)
