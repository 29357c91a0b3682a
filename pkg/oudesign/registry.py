import logging
from typing import Callable, Dict, List, Mapping

from .exceptions import ValidationError
from .sde import LinearSDEModel, verify_antiderivative

logger = logging.getLogger("oudesign")

ModelFactory = Callable[..., LinearSDEModel]


class ModelRegistry:
    """Maps model names to factories taking (params, x0_parameter)."""
    def __init__(self):
        self.factories: Dict[str, ModelFactory] = {}
        self._initialized = False

    def _initialize_builtins(self):
        if not self._initialized:
            from .builtins import BUILTIN_FACTORIES

            for name, factory in BUILTIN_FACTORIES.items():
                self.factories.setdefault(name, factory)
            self._initialized = True

    def register(self, name: str, factory: ModelFactory):
        """Register a custom model factory, replacing any previous one."""
        self._initialize_builtins()
        if name in self.factories:
            logger.warning(f"Replacing registered model factory '{name}'")
        self.factories[name] = factory

    def get(self, name: str) -> ModelFactory:
        self._initialize_builtins()
        if name not in self.factories:
            raise ValidationError(f"Unknown model '{name}'; available: {self.names()}")
        return self.factories[name]

    def names(self) -> List[str]:
        self._initialize_builtins()
        return sorted(self.factories)

    def create(self, name: str, params: Mapping[str, float], x0_parameter: bool = False) -> LinearSDEModel:
        model = self.get(name)(dict(params), x0_parameter=x0_parameter)
        verify_antiderivative(model)
        logger.debug(f"Built model {name} with parameters {model.theta.as_dict()}")
        return model


registry = ModelRegistry()


def make_builtin_model(name: str, params: Mapping[str, float], x0_parameter: bool = False) -> LinearSDEModel:
    """Build a registered model from a label -> value map."""
    return registry.create(name, params, x0_parameter=x0_parameter)


__all__ = ["ModelRegistry", "registry", "make_builtin_model"]
