__version__ = "0.1.0"
__license__ = "MIT"

from .exceptions import OUDesignError
from .models import Criterion, Domain, InfoMatrix, ParameterRole, SamplingDesign, SubvectorSelection
from .registry import make_builtin_model, registry
from .fisher import fim_exact, fim_markov_sum, fim_subvector
from .asymptotic import fim_asymptotic
from .efficiency import criterion_value, ultimate_efficiency
from .design import equidistant_design, optimize_design, repair_design

__all__ = [
    "OUDesignError",
    "Criterion",
    "Domain",
    "InfoMatrix",
    "ParameterRole",
    "SamplingDesign",
    "SubvectorSelection",
    "make_builtin_model",
    "registry",
    "fim_exact",
    "fim_markov_sum",
    "fim_subvector",
    "fim_asymptotic",
    "criterion_value",
    "ultimate_efficiency",
    "equidistant_design",
    "optimize_design",
    "repair_design",
]
