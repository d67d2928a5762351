"""Link-level energy ensemble: recurrent, cross-layer linear and embedding components."""
from .baseline import LinearBaseline
from .batching import TripTensors, make_batches
from .loss import batch_loss, batch_loss_grad, per_trip_loss, trip_loss_terms
from .network import (
    cross_layer,
    forward_batch,
    forward_deep,
    forward_linear,
    forward_recurrent,
    predict_candidates,
    predict_links,
    predict_trip,
    vocab_index,
)
from .params import COMPONENTS, ModelConfig, ModelParams, init_params, tensor_shapes
from .training import (
    OptimizerState,
    TrainConfig,
    TrainingDiverged,
    TrainResult,
    build_model,
    evaluate_tensors,
    loss_and_grad,
    train,
    train_val_split,
)
from .checkpoint import (
    Checkpoint,
    CheckpointCorruptError,
    CheckpointDimensionError,
    CheckpointError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    checkpoint_version,
    load_checkpoint,
    read_checkpoint,
    save_checkpoint,
)
