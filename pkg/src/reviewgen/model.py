"""Full bilevel model: shared embedding, feature projection, mask
generator, and the decoding layer, with the per-step wiring between
them.

One step works on one token id: its embedding drives both recurrent
layers; the lower layer's hidden state masks the projected image
feature; the masked feature plus the rating vector is the decoder's
guidance for the same step; the decoder's hidden state is read out as a
distribution over the vocabulary for the next token.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cell import GLSTMParams, GLSTMState, StepTape, glstm_forward, init_glstm
from .decoder import DecoderParams, decode_step_taped, init_decoder
from .guidance import ConfigError, MASK_NORMS, fuse_guidance, normalize_mask, \
    project_feature
from .numerics import RngState, ShapeError, init_matrix
from .textdata import BOS_ID, encode_rating, rating_dim

DEFAULT_INIT_SCALE = 0.08


@dataclass
class ModelConfig:
    vocab_size: int
    embed_dim: int = 16
    feature_dim: int = 32          # length of feature vectors in the data
    hidden_dim: int = 64           # decoder hidden size
    proj_dim: int | None = None    # model-side feature size; None keeps feature_dim
    rating_mode: str = "onehot"
    mask_norm: str = "none"
    output_tanh: bool = False
    cell_clip: float = 50.0
    init_scale: float = DEFAULT_INIT_SCALE
    train_embedding: bool = True

    @property
    def mask_dim(self) -> int:
        """Effective feature length inside the model (after projection)."""
        return self.proj_dim if self.proj_dim is not None else self.feature_dim

    @property
    def rating_dim(self) -> int:
        return rating_dim(self.rating_mode)

    @property
    def guidance_dim(self) -> int:
        return self.mask_dim + self.rating_dim

    def validate(self):
        if self.vocab_size < 4:
            raise ConfigError(
                f"vocab_size {self.vocab_size} < 4 reserved control ids")
        for name in ("embed_dim", "feature_dim", "hidden_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.proj_dim is not None and not (1 <= self.proj_dim <= self.feature_dim):
            raise ConfigError(
                f"proj_dim {self.proj_dim} must be in [1, feature_dim="
                f"{self.feature_dim}]")
        if self.mask_norm not in MASK_NORMS:
            raise ConfigError(f"mask_norm must be one of {MASK_NORMS}")
        if self.rating_mode not in ("onehot", "scalar"):
            raise ConfigError("rating_mode must be 'onehot' or 'scalar'")
        if self.cell_clip < 0:
            raise ConfigError("cell_clip must be >= 0 (0 disables)")


@dataclass
class ReviewModel:
    config: ModelConfig
    embedding: np.ndarray          # (vocab, embed), shared by both layers
    projection: np.ndarray         # (mask_dim, feature_dim)
    lower: GLSTMParams             # mask generator
    decoder: DecoderParams

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        """All trainable arrays with stable names, in checkpoint order."""
        return [
            ("embedding", self.embedding),
            ("projection", self.projection),
            ("lower.Wx", self.lower.Wx),
            ("lower.Wm", self.lower.Wm),
            ("lower.Wq", self.lower.Wq),
            ("lower.b", self.lower.b),
            ("decoder.Wx", self.decoder.cell.Wx),
            ("decoder.Wm", self.decoder.cell.Wm),
            ("decoder.Wq", self.decoder.cell.Wq),
            ("decoder.b", self.decoder.cell.b),
            ("W_y", self.decoder.W_y),
            ("b_y", self.decoder.b_y),
        ]

    def validate(self):
        cfg = self.config
        cfg.validate()
        if self.lower.hidden_dim != cfg.mask_dim:
            raise ConfigError(
                f"attention mask length {self.lower.hidden_dim} must equal "
                f"model feature length {cfg.mask_dim}")
        if self.projection.shape != (cfg.mask_dim, cfg.feature_dim):
            raise ConfigError(
                f"projection shape {self.projection.shape} != "
                f"({cfg.mask_dim}, {cfg.feature_dim})")
        if self.decoder.cell.guidance_dim != cfg.guidance_dim:
            raise ConfigError(
                f"decoder guidance dim {self.decoder.cell.guidance_dim} != "
                f"masked feature + rating dim {cfg.guidance_dim}")
        if self.embedding.shape != (cfg.vocab_size, cfg.embed_dim):
            raise ConfigError(
                f"embedding shape {self.embedding.shape} != "
                f"({cfg.vocab_size}, {cfg.embed_dim})")


def build_model(config: ModelConfig, seed: int = 0) -> ReviewModel:
    """Deterministically initialized model for the given seed.

    The projection starts as the identity when it is square (features
    pass through untouched until training moves it), uniform otherwise.
    """
    config.validate()
    rng = RngState(seed)
    s = config.init_scale
    embedding = init_matrix(config.vocab_size, config.embed_dim, s, rng)
    if config.mask_dim == config.feature_dim:
        projection = np.eye(config.mask_dim)
    else:
        projection = init_matrix(config.mask_dim, config.feature_dim, s, rng)
    lower = init_glstm(config.embed_dim, config.mask_dim,
                       config.rating_dim, s, rng)
    decoder = init_decoder(config.vocab_size, config.embed_dim,
                           config.hidden_dim, config.guidance_dim, s, rng)
    model = ReviewModel(config=config, embedding=embedding,
                        projection=projection, lower=lower, decoder=decoder)
    model.validate()
    return model


@dataclass
class StepResult:
    """Outputs and tapes of one model step (tapes feed training)."""

    token: int
    probs: np.ndarray
    mask: np.ndarray               # post-normalization, as fused
    lower_state: GLSTMState
    dec_state: GLSTMState
    lower_tape: StepTape
    dec_tape: StepTape


def initial_states(model: ReviewModel) -> tuple[GLSTMState, GLSTMState]:
    """Zero start states for the mask generator and the decoder."""
    return (GLSTMState.zeros(model.config.mask_dim),
            GLSTMState.zeros(model.config.hidden_dim))


def prepare_feature(model: ReviewModel, feature: np.ndarray) -> np.ndarray:
    """Project a stored feature vector into the model's feature space."""
    if feature.shape[0] != model.config.feature_dim:
        raise ShapeError(
            f"feature has length {feature.shape[0]}, model expects "
            f"{model.config.feature_dim}")
    return project_feature(feature, model.projection)


def model_step(model: ReviewModel, f: np.ndarray, g: np.ndarray,
               token_id: int, lower_state: GLSTMState,
               dec_state: GLSTMState) -> StepResult:
    """One step of the bilevel model on an already-projected feature."""
    cfg = model.config
    if not 0 <= token_id < cfg.vocab_size:
        raise ValueError(
            f"token id {token_id} outside vocabulary of size {cfg.vocab_size}")
    x = model.embedding[token_id]
    new_lower, lower_tape = glstm_forward(
        model.lower, x, g, lower_state,
        cell_clip=cfg.cell_clip, output_tanh=cfg.output_tanh)
    mask = normalize_mask(new_lower.m, cfg.mask_norm)
    g_hat = fuse_guidance(f, mask, g)
    probs, new_dec, dec_tape = decode_step_taped(
        model.decoder, x, g_hat, dec_state,
        cell_clip=cfg.cell_clip, output_tanh=cfg.output_tanh)
    return StepResult(token=token_id, probs=probs, mask=mask,
                      lower_state=new_lower, dec_state=new_dec,
                      lower_tape=lower_tape, dec_tape=dec_tape)


def run_teacher_forced(model: ReviewModel, feature: np.ndarray, rating: int,
                       tokens) -> list[StepResult]:
    """Feed tokens[:-1] through the model; one StepResult per input.

    ``tokens`` must start with the begin-of-sequence id; the final token
    is target-only and never fed as input.
    """
    if len(tokens) < 2:
        raise ValueError("token sequence needs at least BOS plus one target")
    if tokens[0] != BOS_ID:
        raise ValueError(
            f"token sequence must start with BOS id {BOS_ID}, got {tokens[0]}")
    f = prepare_feature(model, feature)
    g = encode_rating(rating, model.config.rating_mode)
    lower_state, dec_state = initial_states(model)
    records = []
    for token in tokens[:-1]:
        rec = model_step(model, f, g, int(token), lower_state, dec_state)
        records.append(rec)
        lower_state, dec_state = rec.lower_state, rec.dec_state
    return records


def rollout(model: ReviewModel, feature: np.ndarray, rating: int,
            tokens) -> list[np.ndarray]:
    """Teacher-forced distributions, one per input position.

    Unlike :func:`run_teacher_forced` every element of ``tokens`` is an
    input here, so a lone [BOS] yields exactly one distribution.
    """
    if len(tokens) < 1 or tokens[0] != BOS_ID:
        raise ValueError(f"rollout input must start with BOS id {BOS_ID}")
    f = prepare_feature(model, feature)
    g = encode_rating(rating, model.config.rating_mode)
    lower_state, dec_state = initial_states(model)
    dists = []
    for token in tokens:
        rec = model_step(model, f, g, int(token), lower_state, dec_state)
        dists.append(rec.probs)
        lower_state, dec_state = rec.lower_state, rec.dec_state
    return dists
