from . import model_zoo
from . import estimators
from . import state_evolution
from . import calibrate
from . import inference
from . import bench
from .version import version as __version__
