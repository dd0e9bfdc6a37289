"""Moving-target-defense switching schedules from epidemic thresholds.

Configurations are (structure, beta, gamma) triples with margin
``beta - gamma * lambda1``. The optimizers pick how long to stay in each
configuration so the switched infection dynamics still die out, and the
simulator checks that on an explicit graph.
"""

from .epidemics import InfectionState, Trajectory, clean_equilibrium_check, integrate_static, simulate_switched
from .errors import (ConvergenceError, DomainError, InfeasibleError, InvalidParameter, MTDError, ParseError,
                     StabilityError)
from .markov import (GeneratorConstants, GeneratorMatrix, Scheduler, build_generator, sample_schedule,
                     stationary_distribution, validate_constants)
from .model import (Configuration, CostFunction, ScheduleMix, Verdict, averaged_margin, check_averaged_threshold,
                    check_static_threshold, margin)
from .opt_params import ParamOptProblem, max_pi1, min_cost, min_cost_shaped, oracle_min_cost
from .opt_structs import StructOptProblem, max_pi1_struct, min_cost_struct, oracle_min_cost_struct
from .spectral import AttackDefenseStructure, generate_structure, load_structure, spectral_radius

__version__ = "0.1.0"
