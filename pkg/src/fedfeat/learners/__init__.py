from .base import (
    LOGISTIC_REGRESSION,
    RANDOM_FOREST,
    BaseModelKind,
    cv_f1,
    cv_f1_detail,
    f1_score,
    fit_base,
    macro_f1,
    predict,
)
from .forest import DecisionTree, RandomForest
from .logistic import LogisticRegression
from .mlp import (
    USEFUL,
    USELESS,
    AdamState,
    JudgeModel,
    TrainHyper,
    adam_step,
    dropout_mask,
    init_model,
    mlp_forward,
    mlp_loss_and_grad,
    train_judge,
)
from .smote import smote

__all__ = [
    "LOGISTIC_REGRESSION",
    "RANDOM_FOREST",
    "USEFUL",
    "USELESS",
    "AdamState",
    "BaseModelKind",
    "DecisionTree",
    "JudgeModel",
    "LogisticRegression",
    "RandomForest",
    "TrainHyper",
    "adam_step",
    "cv_f1",
    "cv_f1_detail",
    "dropout_mask",
    "f1_score",
    "fit_base",
    "init_model",
    "macro_f1",
    "mlp_forward",
    "mlp_loss_and_grad",
    "predict",
    "smote",
    "train_judge",
]
