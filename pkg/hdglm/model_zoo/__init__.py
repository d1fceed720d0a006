from hdglm.model_zoo.links import (
    LinkSpec, Logistic, ClippedExp, Piecewise, Cloglog, Linear, Square, make_link
)
from hdglm.model_zoo.responses import (
    ResponseLaw, Bernoulli, Poisson, GaussianAdditive, Exponential, h_sample
)
from hdglm.model_zoo.glm import GlmModel, make_model
from hdglm.model_zoo.covariance import CovarianceModel, identity, ar1, explicit, make_covariance
from hdglm.model_zoo.synthetic import (
    SyntheticConfig, Dataset, sample_dataset, augment_with_noise, derive_seed
)
from hdglm.model_zoo.io import read_dataset, write_dataset, read_vector, write_vector
