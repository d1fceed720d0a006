from hdglm.estimators.prox import ProxQuery, prox, prox_batch
from hdglm.estimators.surrogate import (
    FitResult, SurrogateFitter, surrogate_loss, surrogate_gradient, fisher_information,
    fit_surrogate, fit_ridge, empirical_se
)
from hdglm.estimators.gamp import GampState, GampSolver, gamp_fit
