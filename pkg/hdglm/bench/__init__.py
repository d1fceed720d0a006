from hdglm.bench.config import load_config, parse_config
from hdglm.bench.ks import ks_statistic
from hdglm.bench.experiments import (
    SCENARIOS, Cell, ExperimentSpec, ExperimentReport, run_cell, run_experiment
)
