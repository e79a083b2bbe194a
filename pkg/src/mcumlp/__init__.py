"""Resource-constrained MLP with embedded-style backpropagation training."""

from .codec import TargetCodec
from .errors import (
    CodecError,
    ConfigError,
    DomainError,
    FitError,
    IntegrityError,
    MlpError,
    OutOfWorldError,
    ParseError,
    ShapeError,
    TrainingDiverged,
)
from .mlp import (
    Dataset,
    MlpNetwork,
    TrainConfig,
    backprop_gradients,
    bpm,
    em,
    evaluate,
    ffm,
    forward,
    init_weights,
    irpm,
    mse,
    predict,
    train,
)

__version__ = "0.1.0"
