"""Rating-guided review generation from image features.

A two-level guided LSTM: a lower cell turns the previous word into an
attention mask over the image feature, and a decoder cell consumes the
masked feature together with the rating to emit the next word.
"""

from .cell import GLSTMParams, GLSTMState, glstm_backward, glstm_forward, \
    init_glstm
from .checkpoint import load_checkpoint, save_checkpoint
from .generation import GenerationConfig, GeneratedReview, beam_search, \
    generate, greedy_decode, sentiment_divergence
from .model import ModelConfig, ReviewModel, build_model
from .textdata import Vocabulary, load_dataset, tokenize
from .training import TrainConfig, gradcheck, sequence_loss, train

__version__ = "0.1.0"

__all__ = [
    "GLSTMParams", "GLSTMState", "glstm_backward", "glstm_forward",
    "init_glstm", "load_checkpoint", "save_checkpoint", "GenerationConfig",
    "GeneratedReview", "beam_search", "generate", "greedy_decode",
    "sentiment_divergence", "ModelConfig", "ReviewModel", "build_model",
    "Vocabulary", "load_dataset", "tokenize", "TrainConfig", "gradcheck",
    "sequence_loss", "train", "__version__",
]
