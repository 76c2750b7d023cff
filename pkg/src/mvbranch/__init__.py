"""Interacting branching diffusions: particle simulation, lifted reference flows,
measure metrics and weak-convergence studies."""

from .branching import (
    BranchingTrajectory,
    EnsembleResult,
    InitialCondition,
    NumericsError,
    PopulationExplosion,
    SimGrid,
    mass_statistics,
    simulate_branching,
    simulate_ensemble,
)
from .coefficients import Bounds, CoefficientSet, OffspringPartition, Scenario, validate_assumptions
from .config import ConfigError, RunConfig, load_config, parse_config
from .functionals import (
    CylinderFunctional,
    LinearOuter,
    QuadraticOuter,
    eval_G,
    flat_derivative_G,
    fp_residual,
    intrinsic_derivative_G,
    ito_residual_empirical,
    make_functional,
    make_test_function,
    value_function_U,
)
from .harness import ReplicaPolicy, fit_rate, run_battery, weak_error_study
from .lifted import lift_Phi, picard_solve, project_T_star, simulate_lifted_self
from .measures import Label, PointMeasure, Population, mass, pair, read_measure, write_measure
from .metrics import bounded_lipschitz, bounded_lipschitz_dual, extended_w1

__version__ = "0.1.0"
