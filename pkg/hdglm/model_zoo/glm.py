from dataclasses import dataclass, replace

from hdglm.exceptions import InvalidLinkParameter
from hdglm.model_zoo.links import LinkSpec, make_link
from hdglm.model_zoo.responses import RESPONSE_LAWS, GaussianAdditive, ResponseLaw


@dataclass(frozen=True)
class GlmModel:
    link: LinkSpec
    law: ResponseLaw

    @property
    def name(self):
        return f"{self.law.law_tag}-{self.link.family_tag}"

    def sample_y(self, z, rng):
        y, _ = self.law.sample(self.link.g(z), rng)
        return y

    def with_noise_variance(self, sigma_e2):
        """Same model with the Gaussian noise variance replaced (e.g. by an estimate)."""
        if not isinstance(self.law, GaussianAdditive):
            return self
        return replace(self, law=GaussianAdditive(sigma_e2))

    def describe(self):
        return {"model": self.name, **self.link.describe(), **self.law.describe()}


def link_from_params(link_tag, params):
    if link_tag == "clippedexp":
        return make_link(link_tag, float(params.get("threshold", 50.0)))
    if link_tag == "piecewise":
        return make_link(link_tag, float(params.get("slope_pos", 5.0)), float(params.get("slope_neg", 0.1)))
    if link_tag == "logistic":
        return make_link(link_tag, float(params.get("shift", 0.0)))
    return make_link(link_tag)


def make_model(name, params=None):
    """
    Parse a ``<law>-<link>`` model string such as ``poisson-clippedexp``.
    Link and noise parameters come from ``params`` (``threshold``,
    ``slope_pos``, ``slope_neg``, ``shift``, ``sigma_e2``).
    """
    params = params or {}
    law_tag, sep, link_tag = name.lower().partition("-")
    if not sep or law_tag not in RESPONSE_LAWS:
        raise InvalidLinkParameter(f"Model must look like '<law>-<link>', got '{name}'")

    link = link_from_params(link_tag, params)
    if law_tag == "gaussian":
        law = GaussianAdditive(float(params.get("sigma_e2", 0.04)))
    else:
        law = RESPONSE_LAWS[law_tag]()
    return GlmModel(link, law)
