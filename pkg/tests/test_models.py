"""Oscillator normal-mode analysis, reference states, and the grid model."""

import math

import numpy as np
import pytest

from qfriction.hilbert import MomentumGrid, expectation
from qfriction.models import (
    OscillatorModel,
    build_hamiltonian,
    displaced_ket,
    gaussian_ground_spec,
    grid_model,
    ground_ket,
    ground_state_vector,
    make_ground_spec,
    mass_weighted_stiffness,
    model_stiffness,
    normal_mode_ops,
    oscillator_space,
    physical_to_normal,
    thermal_state,
    vacuum_annihilators,
)

# compact grid used throughout: tails are below the edge threshold for
# both widths, and the space stays small (2 x 45 = 90)
GRID = MomentumGrid(points=45, p_min=-11.0, dp=0.5)
SIGMAS = (0.6, 1.0)


def test_model_validation():
    with pytest.raises(ValueError):
        OscillatorModel(omega1=-1.0, omega2=2.0, theta=0.0)
    with pytest.raises(ValueError):
        OscillatorModel(omega1=1.0, omega2=2.0, theta=0.0, m1=0.0)
    with pytest.raises(ValueError):
        OscillatorModel(omega1=1.0, omega2=2.0, theta=4.0)
    m = OscillatorModel(omega1=1.0, omega2=2.0, theta=0.3, hbar=2.0)
    assert m.betas == (0.5, 0.25)


def test_physical_to_normal_reconstructs_stiffness():
    """The returned (omega, theta) must reproduce the mass-weighted
    quadratic form they were extracted from, draw by draw."""
    rng = np.random.default_rng(12)
    for _ in range(25):
        M, mu, m1 = rng.uniform(0.2, 5.0, size=3)
        omega_trap = rng.uniform(0.2, 3.0)
        k_vib = rng.uniform(0.05, 4.0)
        k = mass_weighted_stiffness(M, mu, m1, omega_trap, k_vib)
        model = physical_to_normal(M, mu, m1, omega_trap, k_vib)
        assert 0 < model.omega1 <= model.omega2
        assert -math.pi / 2 < model.theta <= math.pi / 2
        assert model.m1 == M and model.m2 == mu
        np.testing.assert_allclose(model_stiffness(model), k,
                                   rtol=1e-10, atol=1e-12)


def test_physical_to_normal_rejects_bad_parameters():
    with pytest.raises(ValueError, match="mu"):
        physical_to_normal(1.0, -1.0, 1.0, 1.0, 1.0)


def test_physical_to_normal_degenerate_resolves_to_zero_angle():
    # vanishing internal mass decouples the coordinates; equal frequencies
    # leave the rotation undetermined and the tie-break is theta = 0
    mu = 1e-28
    model = physical_to_normal(1.0, mu, 1.0, 1.0, mu)
    assert model.theta == 0.0
    assert model.omega1 == pytest.approx(1.0, rel=1e-10)
    assert model.omega2 == pytest.approx(1.0, rel=1e-10)


def test_oscillator_space_forms():
    assert oscillator_space(5).dims == (5, 5)
    assert oscillator_space((4, 7)).dims == (4, 7)


def test_hamiltonian_spectrum_is_the_normal_mode_ladder():
    model = OscillatorModel(omega1=1.0, omega2=2.2, theta=0.4)
    space = oscillator_space((3, 4))
    h = build_hamiltonian(model, space).matrix
    expect = sorted(1.0 * n1 + 2.2 * n2 for n1 in range(3) for n2 in range(4))
    np.testing.assert_allclose(np.sort(np.diag(h).real), expect)
    assert np.abs(h - np.diag(np.diag(h))).max() == 0.0


def test_lab_frame_operators_recover_commutators():
    model = OscillatorModel(omega1=1.0, omega2=2.2, theta=0.5, m1=1.7, m2=0.4)
    space = oscillator_space(10)
    ops = normal_mode_ops(model, space)
    # [x1, p1] = i*hbar and [x1, p2] = 0 away from the top rung of either
    # ladder; the truncated mode commutators each dent their highest level
    # and with m1 != m2 those dents do not cancel in the cross terms.
    c11 = (ops.x1 @ ops.p1 - ops.p1 @ ops.x1).matrix
    c12 = (ops.x1 @ ops.p2 - ops.p2 @ ops.x1).matrix
    inner = [i * 10 + j for i in range(8) for j in range(8)]
    np.testing.assert_allclose(c11[np.ix_(inner, inner)],
                               1j * np.eye(64), atol=1e-12)
    np.testing.assert_allclose(c12[np.ix_(inner, inner)], np.zeros((64, 64)),
                               atol=1e-12)


def test_vacuum_annihilators_kill_the_ground_state():
    model = OscillatorModel(omega1=1.0, omega2=2.2, theta=math.pi / 6)
    space = oscillator_space(8)
    frak1, frak2 = vacuum_annihilators(model, space)
    g = ground_ket(space)
    assert np.abs(frak1.matrix @ g).max() == 0.0
    assert np.abs(frak2.matrix @ g).max() == 0.0


def test_displaced_ket_overlap():
    model = OscillatorModel(omega1=1.0, omega2=2.2, theta=0.3)
    space = oscillator_space(20)
    d = 0.3 + 0.2j
    ket = displaced_ket(model, space, 1, d)
    assert np.linalg.norm(ket) == pytest.approx(1.0, abs=1e-12)
    assert abs(ket[0]) ** 2 == pytest.approx(math.exp(-abs(d) ** 2), abs=1e-12)
    with pytest.raises(ValueError):
        displaced_ket(model, space, 3, 0.1)


def test_displaced_ket_coherent_expectation():
    model = OscillatorModel(omega1=1.0, omega2=2.2, theta=0.0)
    space = oscillator_space(24)
    ket = displaced_ket(model, space, 2, 0.4)
    ops = normal_mode_ops(model, space)
    assert expectation(ops.mode2.a, ket).real == pytest.approx(0.4, abs=1e-10)
    assert expectation(ops.mode2.n, ket).real == pytest.approx(0.16, abs=1e-10)


def test_thermal_state_matches_explicit_gibbs():
    model = OscillatorModel(omega1=1.0, omega2=2.2, theta=0.7)
    space = oscillator_space(6)
    H = build_hamiltonian(model, space)
    T = 0.8
    w = np.diag(H.matrix).real
    weights = np.exp(-(w - w.min()) / T)
    weights /= weights.sum()
    rho = thermal_state(H, T)
    np.testing.assert_allclose(np.diag(rho.matrix).real, weights, atol=1e-14)
    assert np.abs(rho.matrix - np.diag(np.diag(rho.matrix))).max() < 1e-14


def test_thermal_state_zero_temperature():
    model = OscillatorModel(omega1=1.0, omega2=2.2, theta=0.7)
    space = oscillator_space(4)
    H = build_hamiltonian(model, space)
    rho = thermal_state(H, 0.0)
    assert rho.matrix[0, 0].real == pytest.approx(1.0)
    with pytest.raises(ValueError):
        thermal_state(H, -0.1)


def test_thermal_state_degenerate_ground_warns():
    from qfriction.hilbert import BosonMode, Operator, make_space
    space = make_space(BosonMode(3))
    H = Operator(space, np.diag([0.0, 0.0, 1.0]))
    with pytest.warns(UserWarning, match="degenerate"):
        rho = thermal_state(H, 0.0)
    np.testing.assert_allclose(np.diag(rho.matrix).real, [0.5, 0.5, 0.0])


# ---------------------------------------------------------------------------
# grid model


def test_ground_spec_validation():
    p = GRID.momenta
    good = np.exp(-np.outer(1.0 / (4.0 * np.asarray(SIGMAS) ** 2), p ** 2))
    good /= math.sqrt(np.sum(np.abs(good) ** 2) * GRID.dp)

    with pytest.raises(ValueError, match="shape"):
        make_ground_spec(GRID, good[:, :-1])
    zero = good.copy()
    zero[1] = 0.0
    with pytest.raises(ValueError, match="identically zero"):
        make_ground_spec(GRID, zero)
    with pytest.raises(ValueError, match="norm"):
        make_ground_spec(GRID, 1.5 * good)
    parallel = np.vstack([good[0], good[0]])
    parallel /= math.sqrt(np.sum(np.abs(parallel) ** 2) * GRID.dp)
    with pytest.raises(ValueError, match="parallel"):
        make_ground_spec(GRID, parallel)
    # two distinct widths so only the live-edge guard can fire
    fat = np.exp(-np.outer(1.0 / np.array([400.0, 500.0]), p ** 2))
    fat /= math.sqrt(np.sum(np.abs(fat) ** 2) * GRID.dp)
    with pytest.raises(ValueError, match="outermost"):
        make_ground_spec(GRID, fat)
    spec = make_ground_spec(GRID, good)
    assert spec.n_channels == 2


def test_gaussian_ground_spec_normalization():
    gs = gaussian_ground_spec(GRID, SIGMAS, weights=(1.0, 0.5))
    total = np.sum(np.abs(gs.channels) ** 2) * GRID.dp
    assert total == pytest.approx(1.0, abs=1e-12)
    v = ground_state_vector(gs)
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError, match="matching lengths"):
        gaussian_ground_spec(GRID, SIGMAS, centers=(0.0,))


def test_grid_model_ground_state_and_ladder():
    gs = gaussian_ground_spec(GRID, SIGMAS)
    gm = grid_model(gs, level_gaps=0.25)
    assert gm.space.dims == (2, GRID.points)
    # the prescribed ground state sits in the kernel of H
    assert np.abs(gm.H.matrix @ gm.ground).max() < 1e-12
    w = np.linalg.eigvalsh(gm.H.matrix)
    np.testing.assert_allclose(w, 0.25 * np.arange(gm.space.dim), atol=1e-10)


def test_grid_model_explicit_gaps():
    gs = gaussian_ground_spec(GRID, SIGMAS)
    dim = 2 * GRID.points
    gaps = np.linspace(0.1, 1.0, dim - 1)
    gm = grid_model(gs, level_gaps=gaps)
    w = np.linalg.eigvalsh(gm.H.matrix)
    np.testing.assert_allclose(w[1:], np.cumsum(gaps), atol=1e-10)
    with pytest.raises(ValueError, match="gaps"):
        grid_model(gs, level_gaps=gaps[:-1])
    with pytest.raises(ValueError):
        grid_model(gs, level_gaps=0.0)
