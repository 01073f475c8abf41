__version__ = "0.1.0"


from . import api
from . import config
from . import decomposition
from . import discrete_ib
from . import dvib_linear
from . import gaussian_core
from . import gaussian_ib
from . import graph_models
from . import loaders
from . import mc_validate
from . import optim
from . import results_export
from . import sem_lab
from . import utils

from .api import *
