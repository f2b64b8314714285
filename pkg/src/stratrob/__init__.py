"""Training and evaluating classifiers against strategic opponents.

Opponents perturb inputs within an L-infinity ball to maximize a utility over
(true label, prediction) pairs; adversarial training is the special case of
the 0-1 utility.
"""

__version__ = "0.1.0"

from .errors import CapacityError, ConfigError, DataError, DomainError, InputError, StratRobError  # noqa: E402
from .nn import DenseNet  # noqa: E402
from .utilities import SemanticPartition, UncertaintySet, UtilityMatrix  # noqa: E402
from .attacks import AttackSpec  # noqa: E402
from .data import Dataset  # noqa: E402

__all__ = [
    "AttackSpec", "CapacityError", "ConfigError", "DataError", "Dataset", "DenseNet", "DomainError",
    "InputError", "SemanticPartition", "StratRobError", "UncertaintySet", "UtilityMatrix", "__version__",
]
