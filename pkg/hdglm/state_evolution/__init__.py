from hdglm.state_evolution.panel import McPanel
from hdglm.state_evolution.solver import (
    SeParams, SeProblem, SeResiduals, residual_se, mc_standard_errors, solve_se, solve_se_multistart
)
from hdglm.state_evolution.logistic import logistic_se_reference, logistic_residual_se
