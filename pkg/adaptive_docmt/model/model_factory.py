import torch

from adaptive_docmt.model.model_config import CONCATENATE, CONTEXT_UNIT, ModelConfig
from adaptive_docmt.model.transformer import DocumentTransformer
from adaptive_docmt.utils.app_exception import ConfigurationError
from adaptive_docmt.utils.logger import logger

log = logger(__name__)


class ModelFactory:
    def build(self, config: ModelConfig, seed: int = 0) -> DocumentTransformer:
        """
        Factory function to create a document transformer for the configured variant.

        Args:
        - config (ModelConfig): the model dimensions and variant.
        - seed (int): seeds the parameter initialisation.

        Returns:
        - DocumentTransformer: an instance of the appropriate subclass, in
            the configured floating point precision.
        """
        log.info(f"building {config.variant} model: {config.to_dict()}")
        torch.manual_seed(seed)

        if config.variant == CONCATENATE:
            from .transformer import ConcatenateTransformer

            model = ConcatenateTransformer(config)
        elif config.variant == CONTEXT_UNIT:
            from .transformer import ContextUnitTransformer

            model = ContextUnitTransformer(config)
        else:
            raise ConfigurationError(f"Unsupported model variant: {config.variant}")

        return model.to(config.torch_dtype())


model_factory = ModelFactory()
