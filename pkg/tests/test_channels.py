"""Jump-operator construction and the generator's algebraic identities."""

import math

import numpy as np
import pytest

from qfriction.channels import (
    DissipatorSpec,
    FrictionChannel,
    build_grid_channel,
    build_lowering_channel,
    build_osc_channel,
    build_osc_finite_T_channel,
    dissipator_apply,
    friction_force,
    g_operator,
    lindblad_apply,
    liouvillian_rhs,
    position_force,
)
from qfriction.errors import DegenerateInputError
from qfriction.hilbert import (
    MomentumGrid,
    destroy,
    make_space,
    BosonMode,
    matrix_exponential,
)
from qfriction.models import (
    OscillatorModel,
    build_hamiltonian,
    gaussian_ground_spec,
    ground_ket,
    ground_state_vector,
    make_ground_spec,
    normal_mode_ops,
    oscillator_space,
)

MODEL = OscillatorModel(omega1=1.0, omega2=2.2, theta=math.pi / 6)
GRID = MomentumGrid(points=45, p_min=-11.0, dp=0.5)
SIGMAS = (0.6, 1.0)


def test_lindblad_apply_two_level_decay():
    """Amplitude damping in closed form: populations flow 1 -> 0 and the
    coherence decays at half the rate."""
    sm = destroy(2)
    rho = np.array([[0.3, 0.1 + 0.2j], [0.1 - 0.2j, 0.7]])
    out = lindblad_apply(sm, rho)
    expect = np.array([[0.7, -0.05 - 0.1j], [-0.05 + 0.1j, -0.7]])
    np.testing.assert_allclose(out, expect, atol=1e-15)


def test_generator_is_traceless_and_hermiticity_preserving():
    space = oscillator_space(5)
    H = build_hamiltonian(MODEL, space)
    ch = build_osc_channel(MODEL, space, kappa=0.2, alpha=0.1, gprime=0.7)
    spec = DissipatorSpec(space=space, channels=(ch,), hbar=1.0)
    rng = np.random.default_rng(2)
    for _ in range(10):
        g = rng.normal(size=(25, 25)) + 1j * rng.normal(size=(25, 25))
        h = 0.5 * (g + g.conj().T)
        out = liouvillian_rhs(h, H, spec)
        assert abs(np.trace(out)) < 1e-13
        assert np.abs(out - out.conj().T).max() < 1e-13


def test_dissipator_apply_sums_channels():
    space = oscillator_space(4)
    c1 = build_osc_channel(MODEL, space, kappa=0.2, gprime=0.5)
    c2 = build_osc_channel(MODEL, space, kappa=-0.1, gprime=0.3)
    both = DissipatorSpec(space=space, channels=(c1, c2), hbar=1.0)
    rng = np.random.default_rng(3)
    g = rng.normal(size=(16, 16))
    rho = 0.5 * (g + g.T) + 0j
    total = dissipator_apply(both, rho)
    parts = lindblad_apply(c1.matrix, rho) + lindblad_apply(c2.matrix, rho)
    np.testing.assert_allclose(total, parts, atol=1e-15)


def test_dissipator_spec_guards():
    space = oscillator_space(4)
    with pytest.raises(ValueError, match="at least one channel"):
        DissipatorSpec(space=space, channels=(), hbar=1.0)
    other = oscillator_space(5)
    ch = build_osc_channel(MODEL, other, kappa=0.2)
    with pytest.raises(ValueError, match="spec's space"):
        DissipatorSpec(space=space, channels=(ch,), hbar=1.0)


def test_g_operator_scalar_and_terms():
    space = oscillator_space(5)
    np.testing.assert_allclose(g_operator(MODEL, space, 0.3),
                               0.3 * np.eye(25))
    ops = normal_mode_ops(MODEL, space)
    spec = {"terms": [{"coeff": 2.0, "factors": ["p1", "x2"]},
                      {"coeff": 1j, "factors": ["p2p"]}]}
    out = g_operator(MODEL, space, spec)
    expect = 2.0 * (ops.p1.matrix @ ops.x2.matrix) + 1j * ops.mode2.p.matrix
    np.testing.assert_allclose(out, expect, atol=1e-14)


def test_g_operator_rejects_position_dependence():
    space = oscillator_space(4)
    with pytest.raises(ValueError, match="translation invariance"):
        g_operator(MODEL, space, {"terms": [{"factors": ["x1"]}]})
    with pytest.raises(ValueError, match="unknown"):
        g_operator(MODEL, space, {"terms": [{"factors": ["q9"]}]})
    with pytest.raises(ValueError, match="terms"):
        g_operator(MODEL, space, [1, 2])


def test_osc_channel_annihilates_vacuum():
    space = oscillator_space(14)
    g = ground_ket(space)
    ch = build_osc_channel(MODEL, space, kappa=0.16125, alpha=0.0, gprime=1.0)
    assert np.abs(ch.matrix @ g).max() == 0.0
    assert ch.variant == "osc-zero-T"


def test_osc_channel_vacuum_eigenvector_with_alpha():
    space = oscillator_space(14)
    g = ground_ket(space)
    alpha = 0.3 - 0.1j
    ch = build_osc_channel(MODEL, space, kappa=0.16125, alpha=alpha)
    assert np.abs(ch.matrix @ g - alpha * g).max() < 1e-14
    assert ch.variant == "osc-alpha"


def test_osc_channel_factor_split():
    # with alpha = 0 the stored factor is literally G' frak2 and the kick
    # exponential times the factor rebuilds the channel
    space = oscillator_space(8)
    ops = normal_mode_ops(MODEL, space)
    ch = build_osc_channel(MODEL, space, kappa=0.3, alpha=0.0, gprime=0.6)
    kick = matrix_exponential(-1j * 0.3 * ops.x1.matrix)
    np.testing.assert_allclose(ch.matrix, kick @ ch.f_matrix, atol=1e-13)


def test_finite_T_channel_weights_and_split():
    space = oscillator_space(10)
    T = 0.5
    ch = build_osc_finite_T_channel(MODEL, space, kappa=0.25, T=T)
    lam1, lam2 = ch.meta["lambdas"]
    assert lam1 == pytest.approx(math.tanh(1.0 / (4 * T)), abs=1e-15)
    assert lam2 == pytest.approx(math.tanh(2.2 / (4 * T)), abs=1e-15)
    # the momentum factor is a positive Hermitian function of the momenta
    f = ch.f_matrix
    assert np.abs(f - f.conj().T).max() < 1e-13
    assert np.linalg.eigvalsh(f).min() > 0.0
    ops = normal_mode_ops(MODEL, space)
    for pop in (ops.mode1.p.matrix, ops.mode2.p.matrix):
        comm = f @ pop - pop @ f
        # truncation leaks only into the last ladder rung
        assert np.abs(comm[:-1, :-1]).max() < 1e-12
    kick = matrix_exponential(-1j * 0.25 * ops.x1.matrix)
    np.testing.assert_allclose(ch.matrix, kick @ ch.f_matrix, atol=1e-14)
    with pytest.raises(ValueError, match="T > 0"):
        build_osc_finite_T_channel(MODEL, space, kappa=0.25, T=0.0)


def test_lowering_channel_is_the_bare_ladder():
    space = oscillator_space(6)
    ops = normal_mode_ops(MODEL, space)
    ch = build_lowering_channel(MODEL, space, mode=2, strength=0.5)
    np.testing.assert_allclose(ch.matrix, 0.5 * ops.mode2.a.matrix)
    assert ch.variant == "lowering-control"
    with pytest.raises(ValueError):
        build_lowering_channel(MODEL, space, mode=0)


# ---------------------------------------------------------------------------
# grid channels


def grid_spec():
    return gaussian_ground_spec(GRID, SIGMAS)


def test_grid_channel_kills_ground_state():
    gs = grid_spec()
    g = ground_state_vector(gs)
    ch = build_grid_channel(gs, kappa=1.0, alpha=0.0)
    assert np.abs(ch.f_matrix @ g).max() < 1e-15
    assert np.abs(ch.matrix @ g).max() < 1e-15
    assert ch.meta["kick_steps"] == 2


def test_grid_channel_ground_eigenvector_with_alpha():
    gs = grid_spec()
    g = ground_state_vector(gs)
    alpha = 0.4
    ch = build_grid_channel(gs, kappa=0.5, alpha=alpha)
    assert np.abs(ch.matrix @ g - alpha * g).max() < 1e-13


def test_grid_channel_gain_profiles():
    gs = grid_spec()
    g0 = np.linspace(1.0, 2.0, GRID.points)
    ch = build_grid_channel(gs, kappa=0.5, G0=g0, G1=2.0 * np.ones(GRID.points))
    # block (0, 0) carries G0 |Psi_1|^2 on the diagonal
    n = GRID.points
    blk = np.diag(ch.f_matrix[:n, :n])
    np.testing.assert_allclose(blk, g0 * np.abs(gs.channels[1]) ** 2, atol=1e-15)
    with pytest.raises(ValueError, match="sampled on"):
        build_grid_channel(gs, kappa=0.5, G0=g0[:-1])
    with pytest.raises(ValueError, match="non-finite"):
        build_grid_channel(gs, kappa=0.5, G0=np.full(n, np.inf))


def test_grid_channel_requires_integral_kick():
    gs = grid_spec()
    with pytest.raises(ValueError, match="integral number of grid steps"):
        build_grid_channel(gs, kappa=0.7)


def test_grid_channel_requires_two_channels():
    raw = np.exp(-GRID.momenta ** 2 / 4.0)[None, :]
    raw = raw / math.sqrt(np.sum(raw ** 2) * GRID.dp)
    single = make_ground_spec(GRID, raw)
    with pytest.raises(ValueError, match="two"):
        build_grid_channel(single, kappa=0.5, alpha=0.1)


def test_grid_channel_dead_zone_rejection():
    """A kick that lands support on grid points where the wavefunction has
    already vanished cannot satisfy the eigenvector condition."""
    gs = grid_spec()
    with pytest.raises(DegenerateInputError, match="vanishes"):
        build_grid_channel(gs, kappa=1.0, alpha=0.2)


def test_grid_channel_ratio_ceiling():
    # clip both channels to a tiny constant floor: every point stays alive,
    # but a long kick then divides a near-peak numerator by the floor
    p = GRID.momenta
    raw = np.exp(-np.outer(1.0 / (4.0 * np.asarray(SIGMAS) ** 2), p ** 2))
    raw /= math.sqrt(np.sum(np.abs(raw) ** 2) * GRID.dp)
    raw = np.maximum(raw, 4e-13)
    raw /= math.sqrt(np.sum(np.abs(raw) ** 2) * GRID.dp)
    gs = make_ground_spec(GRID, raw)
    with pytest.raises(DegenerateInputError, match="ratio factor"):
        build_grid_channel(gs, kappa=8.0, alpha=0.2)


# ---------------------------------------------------------------------------
# force operators


def test_friction_force_single_channel():
    space = oscillator_space(6)
    ch = build_osc_channel(MODEL, space, kappa=0.4, gprime=0.8)
    spec = DissipatorSpec(space=space, channels=(ch,), hbar=2.0)
    F = friction_force(spec).matrix
    expect = -2.0 * 0.4 * (ch.f_matrix.conj().T @ ch.f_matrix)
    np.testing.assert_allclose(F, expect, atol=1e-14)
    assert np.abs(F - F.conj().T).max() < 1e-14
    assert np.linalg.eigvalsh(F).max() <= 1e-14


def test_position_force_ratio_only_grid_channel_vanishes():
    # an internally diagonal real factor commutes with its own momentum
    # derivative, so the position force is identically zero
    gs = grid_spec()
    zero = np.zeros(GRID.points)
    ch = build_grid_channel(gs, kappa=0.5, alpha=0.4, G0=zero, G1=zero)
    X = position_force(ch)
    assert np.abs(X.matrix).max() == 0.0


def test_position_force_grid_channel_is_hermitian():
    gs = grid_spec()
    ch = build_grid_channel(gs, kappa=0.5, alpha=0.4)
    X = position_force(ch).matrix
    assert np.abs(X - X.conj().T).max() < 1e-14


def test_position_force_oscillator_needs_x1():
    space = oscillator_space(6)
    ch = build_osc_channel(MODEL, space, kappa=0.4)
    with pytest.raises(ValueError, match="x1"):
        position_force(ch)
    X = position_force(ch, normal_mode_ops(MODEL, space).x1).matrix
    assert np.abs(X - X.conj().T).max() < 1e-13


def test_position_force_rejects_non_diagonal_grid_factor():
    gs = grid_spec()
    ch = build_grid_channel(gs, kappa=1.0)
    smeared = np.roll(ch.f_matrix, 1, axis=1)
    fake = FrictionChannel(space=ch.space, variant="grid-two-level",
                           kappa=ch.kappa, alpha=0.0, matrix=ch.matrix,
                           f_matrix=smeared, hbar=1.0)
    with pytest.raises(ValueError, match="diagonal"):
        position_force(fake)
