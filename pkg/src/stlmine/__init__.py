"""stlmine: mine tight temporal-logic requirements from black-box systems.

The pieces compose bottom-up: ``signals``/``stl``/``robustness`` monitor
quantitative satisfaction of temporal formulas on sampled traces; ``gp``
and ``acquisition`` drive sample-efficient search over a condition box;
``mining`` alternates monotone parameter synthesis with falsification;
``systems`` supplies the benchmark plants and ``cli`` the command-line
front end.
"""

from .signals import Signal, read_signal_csv, write_signal_csv
from .stl import (
    ParameterSpec,
    ParametricFormula,
    parse_formula,
    formula_to_text,
    instantiate,
    horizon,
)
from .robustness import robustness, satisfies
from .gp import GaussianKernel, MaternKernel, GpPosterior, information_gain
from .acquisition import (
    AcquisitionConfig,
    Domain,
    RunTrace,
    beta_schedule,
    eta_normalize,
    select_next,
    optimize,
    regret_bound,
    nelder_mead,
)
from .mining import (
    CounterexampleSet,
    MiningConfig,
    MiningResult,
    synthesize_parameters,
    falsify,
    mine,
    validate,
)
from .systems import SystemUnderTest, ackley, simulate, transmission_surrogate
from .templates import template_by_name, transmission_templates

__version__ = "0.1.0"
