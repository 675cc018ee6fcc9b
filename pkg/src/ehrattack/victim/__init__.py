"""Reference victim survival models and their training."""
from .features import Vocabulary, featurize, featurize_many
from .models import (DiscreteTimeHazardModel, ExponentialHazardModel, load_model,
                     model_from_dict, model_to_dict, save_model)
from .train import TrainingConfig, TrainingReport, train_victim

__all__ = [
    "DiscreteTimeHazardModel", "ExponentialHazardModel", "TrainingConfig", "TrainingReport",
    "Vocabulary", "featurize", "featurize_many", "load_model", "model_from_dict",
    "model_to_dict", "save_model", "train_victim",
]
