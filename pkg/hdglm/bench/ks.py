import numpy as np
import scipy.stats

from hdglm.exceptions import TooFewSamples

MIN_SAMPLES = 20


def ks_statistic(sample):
    """One-sample Kolmogorov-Smirnov test against N(0, 1), asymptotic p-value."""
    sample = np.asarray(sample, dtype=float)
    if sample.size < MIN_SAMPLES:
        raise TooFewSamples(f"KS test needs at least {MIN_SAMPLES} values, got {sample.size}")
    D, pvalue = scipy.stats.kstest(sample, "norm", method="asymp")
    return float(D), float(pvalue)
