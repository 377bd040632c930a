"""From-scratch numeric core: optimizers, classifiers, BPTT, gradient checks, model I/O."""

from .gradcheck import gradient_check
from .gru import BIGRU_PRESETS, BiGRUClassifier, BiGRUConfig, gru_forward
from .models import (
    MLPModel,
    SoftmaxModel,
    cross_entropy_from_logits,
    nb_fit,
    nb_predict_proba,
    sigmoid,
    softmax_probs,
)
from .optim import Adam, schedule_lr
from .serialize import MODEL_MAGIC, load_model, save_model
from .train import (
    TrainConfig,
    TrainedClassifier,
    TrainingDiverged,
    class_weight_vector,
    predict,
    train_gradient_model,
    train_nb,
)

__all__ = [
    "Adam",
    "BIGRU_PRESETS",
    "BiGRUClassifier",
    "BiGRUConfig",
    "MLPModel",
    "MODEL_MAGIC",
    "SoftmaxModel",
    "TrainConfig",
    "TrainedClassifier",
    "TrainingDiverged",
    "class_weight_vector",
    "cross_entropy_from_logits",
    "gradient_check",
    "gru_forward",
    "load_model",
    "nb_fit",
    "nb_predict_proba",
    "predict",
    "save_model",
    "schedule_lr",
    "sigmoid",
    "softmax_probs",
    "train_gradient_model",
    "train_nb",
]
