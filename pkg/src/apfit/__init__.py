"""Parameter fitting for phenomenological cardiac action-potential models.

The package fits six dimensionless cell models to voltage time series and/or
APD targets with a massively parallel particle swarm optimizer. Entry points:

* :mod:`apfit.models`: model catalogs, default bounds, derivatives
* :mod:`apfit.simulator`: paced forward-Euler simulation, APD measurement
* :mod:`apfit.fitness`: error metrics and evaluation contexts
* :mod:`apfit.pso`: the swarm optimizer
* :mod:`apfit.orchestrator`: config validation, ``run_fit``, exports
* :mod:`apfit.cli`: command line front end (``apfit``)
* :mod:`apfit.service`: HTTP fit service used by the browser UI
"""

__version__ = "0.1.0"

from .models import Bounds, CellState, ModelId, ModelSpec  # noqa: F401
from .models import default_bounds, initial_state, model_spec  # noqa: F401
from .models import reference_params, rhs  # noqa: F401
from .simulator import PacingConfig, Trace, measure_apds, simulate  # noqa: F401
from .stimulus import BiphasicStimulus, SquareStimulus  # noqa: F401
from .dataio import ApdDataset, VoltageDataset  # noqa: F401
from .pso import PsoHyper, compute_chi  # noqa: F401
from .orchestrator import FitConfig, FitResult, build_job, run_fit  # noqa: F401
