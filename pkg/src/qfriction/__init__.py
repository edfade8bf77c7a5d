"""Translation-invariant quantum friction: channel construction, density
matrix propagation, and criteria certification on finite models."""

from .errors import DegenerateInputError, IntegrationFailure, ResourceLimitError
from .hilbert import (
    BosonMode,
    DensityMatrix,
    HilbertSpace,
    InternalLevels,
    MomentumGrid,
    Operator,
    commutator,
    destroy,
    embed,
    expectation,
    frob_norm,
    grid_operators,
    herm_defect,
    make_space,
    matrix_exponential,
    max_abs,
    mode_operators,
    random_density_matrix,
)
from .models import (
    GridModel,
    GroundStateSpec,
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
from .channels import (
    DissipatorSpec,
    FrictionChannel,
    build_grid_channel,
    build_osc_channel,
    build_osc_finite_T_channel,
    dissipator_apply,
    friction_force,
    g_operator,
    lindblad_apply,
    liouvillian_rhs,
    position_force,
)
from .evolution import (
    SteadyStateResult,
    Trajectory,
    assemble_liouvillian,
    integrate,
    steady_state_analysis,
    unvec,
    vec,
)
from .criteria import (
    CheckResult,
    CriteriaReport,
    EhrenfestReport,
    RTResult,
    TIResult,
    WitnessReport,
    detailed_balance_witnesses,
    ehrenfest_check,
    ehrenfest_operators,
    ground_decay_rate,
    momentum_balance_residual,
    rt_probe,
    sample_states,
    therm_residual,
    ti_residual,
)
from .serialize import (
    load_density_matrix,
    load_operator,
    operator_from_dict,
    operator_to_dict,
    save_operator,
    write_trajectory_csv,
)
from .config import (
    ConfigError,
    ModelBundle,
    build_dissipator,
    build_model_bundle,
    initial_state,
    load_config,
    momentum_probe_ops,
    observable_map,
    validate_config,
)

__version__ = "0.1.0"
