"""Propagator, superoperator assembly, and spectral analysis."""

import math

import numpy as np
import pytest

from qfriction.channels import (
    DissipatorSpec,
    FrictionChannel,
    build_lowering_channel,
    build_osc_channel,
    liouvillian_rhs,
)
from qfriction.errors import ResourceLimitError
from qfriction.evolution import (
    assemble_liouvillian,
    integrate,
    steady_state_analysis,
    suggest_dt,
    unvec,
    vec,
)
from qfriction.hilbert import InternalLevels, destroy, make_space
from qfriction.models import (
    OscillatorModel,
    build_hamiltonian,
    oscillator_space,
)

MODEL = OscillatorModel(omega1=1.0, omega2=2.2, theta=math.pi / 6)

GAMMA = 0.8
OMEGA = 2.5


def two_level_decay():
    """Bare two-level amplitude damping with a level splitting."""
    space = make_space(InternalLevels(levels=2))
    sm = math.sqrt(GAMMA) * destroy(2)
    ch = FrictionChannel(space=space, variant="lowering-control", kappa=0.0,
                         alpha=0.0, matrix=sm, f_matrix=sm, hbar=1.0)
    spec = DissipatorSpec(space=space, channels=(ch,), hbar=1.0)
    H = np.diag([0.0, OMEGA]).astype(complex)
    rho0 = np.array([[0.25, 0.3 - 0.1j], [0.3 + 0.1j, 0.75]])
    return space, H, spec, rho0


def decay_closed_form(rho0, t):
    ee = rho0[1, 1] * math.exp(-GAMMA * t)
    ge = rho0[0, 1] * np.exp((1j * OMEGA - 0.5 * GAMMA) * t)
    return np.array([[1.0 - ee, ge], [np.conj(ge), ee]])


def test_vec_unvec_column_stacking():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    np.testing.assert_array_equal(unvec(vec(x), 4), x)
    np.testing.assert_allclose(np.kron(b.T, a) @ vec(x), vec(a @ x @ b),
                               atol=1e-12)


def test_assembled_matrix_matches_general_rhs():
    space = oscillator_space(4)
    H = build_hamiltonian(MODEL, space)
    ch = build_osc_channel(MODEL, space, kappa=0.2, alpha=0.1, gprime=0.7)
    spec = DissipatorSpec(space=space, channels=(ch,), hbar=1.0)
    L = assemble_liouvillian(H, spec)
    rng = np.random.default_rng(5)
    for _ in range(5):
        # general complex matrices, not just Hermitian ones
        m = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
        np.testing.assert_allclose(unvec(L @ vec(m), 16),
                                   liouvillian_rhs(m, H, spec), atol=1e-12)


def test_integrate_input_validation():
    space, H, spec, rho0 = two_level_decay()
    with pytest.raises(ValueError, match="two snapshot times"):
        integrate(rho0, H, spec, [0.0])
    with pytest.raises(ValueError, match="strictly increasing"):
        integrate(rho0, H, spec, [0.0, 1.0, 1.0])
    with pytest.raises(ValueError, match="unknown method"):
        integrate(rho0, H, spec, [0.0, 1.0], method="euler")
    with pytest.raises(ValueError, match="dt must be positive"):
        integrate(rho0, H, spec, [0.0, 1.0], dt=-0.1)


def test_closed_system_phase_exact():
    # zero-strength channel: pure von Neumann rotation of the coherence
    space = oscillator_space(3)
    H = build_hamiltonian(MODEL, space)
    ch = build_lowering_channel(MODEL, space, mode=1, strength=0.0)
    spec = DissipatorSpec(space=space, channels=(ch,), hbar=1.0)
    dim = space.dim
    rho0 = np.zeros((dim, dim), dtype=complex)
    rho0[0, 0] = rho0[1, 1] = 0.5
    rho0[0, 1] = rho0[1, 0] = 0.5
    t_end = 3.0
    traj = integrate(rho0, H, spec, [0.0, t_end], method="rk4", dt=1e-3)
    e = np.diag(H.matrix).real
    expect = 0.5 * np.exp(1j * (e[1] - e[0]) * t_end)
    assert abs(traj.final_state.matrix[0, 1] - expect) < 1e-10


@pytest.mark.parametrize("method,kwargs", [
    ("rk4", {"dt": 0.002}),
    ("rk45", {"rtol": 1e-9, "atol": 1e-12}),
])
def test_two_level_decay_closed_form(method, kwargs):
    space, H, spec, rho0 = two_level_decay()
    times = np.linspace(0.0, 2.0, 9)
    traj = integrate(rho0, H, spec, times, method=method, **kwargs)
    for t, state in zip(times, traj.states):
        np.testing.assert_allclose(state.matrix, decay_closed_form(rho0, t),
                                   atol=1e-7)
    # the rhs trace projection keeps the trace pinned
    assert np.abs(traj.monitors["trace"] - 1.0).max() < 1e-13
    assert traj.monitors["min_eig"].min() > -1e-12
    assert traj.monitors["herm_defect"][0] == 0.0
    assert traj.monitors["herm_defect"].max() < 1e-12


def test_trajectory_layout_and_observables():
    space, H, spec, rho0 = two_level_decay()
    n_op = np.diag([0.0, 1.0])
    traj = integrate(rho0, H, spec, [0.0, 0.1, 0.2], method="rk4", dt=0.01,
                     observables={"excited": n_op}, record_steps=True)
    assert len(traj.states) == 3
    np.testing.assert_array_equal(traj.states[0].matrix, rho0)
    assert traj.monitors["excited"].shape == (3,)
    assert traj.monitors["excited"][0] == pytest.approx(0.75)
    # dense per-step series: 10 steps per segment plus the initial point
    assert traj.step_times.shape == (21,)
    assert traj.step_times[0] == 0.0
    assert traj.step_times[-1] == pytest.approx(0.2)
    assert np.all(np.diff(traj.step_times) > 0)
    for key in ("trace", "excited"):
        assert traj.step_series[key].shape == (21,)
    expected = rho0[1, 1].real * np.exp(-GAMMA * traj.step_times)
    np.testing.assert_allclose(traj.step_series["excited"], expected,
                               atol=1e-9)


def test_suggest_dt_zero_dissipation():
    space = oscillator_space(3)
    H = build_hamiltonian(MODEL, space)
    ch = build_lowering_channel(MODEL, space, mode=1, strength=0.0)
    spec = DissipatorSpec(space=space, channels=(ch,), hbar=1.0)
    e = np.diag(H.matrix).real
    assert suggest_dt(H, spec) == pytest.approx(2.5 / (e.max() - e.min()))


def test_superoperator_size_ceiling():
    space, H, spec, _ = two_level_decay()
    with pytest.raises(ResourceLimitError, match="ceiling"):
        assemble_liouvillian(H, spec, max_side=3)
    big = oscillator_space((7, 10))
    ch = build_osc_channel(MODEL, big, kappa=0.1)
    big_spec = DissipatorSpec(space=big, channels=(ch,), hbar=1.0)
    with pytest.raises(ResourceLimitError):
        steady_state_analysis(build_hamiltonian(MODEL, big), big_spec)


def test_steady_state_spectrum_amplitude_damping():
    # H = 0 leaves the exact generator spectrum {0, -g/2, -g/2, -g}
    space, _, spec, _ = two_level_decay()
    res = steady_state_analysis(np.zeros((2, 2)), spec)
    got = np.sort_complex(res.eigenvalues)
    expect = np.sort_complex(np.array([0.0, -GAMMA, -GAMMA / 2, -GAMMA / 2]))
    np.testing.assert_allclose(got, expect, atol=1e-12)
    assert res.kernel_dim == 1
    assert res.gap == pytest.approx(GAMMA / 2)
    assert abs(res.max_real) < 1e-12
    np.testing.assert_allclose(res.states[0].matrix,
                               np.diag([1.0, 0.0]), atol=1e-12)
