"""Guidance generator: attention mask from the word stream, fused with
the rating encoding.

A lower guided-LSTM consumes the previous word's embedding under rating
guidance; its hidden state is the attention mask over the image feature
vector.  The mask is applied elementwise and the rating vector is
concatenated after it, giving the time-varying guidance the decoder
sees.  The lower layer never sees the image feature itself, so the mask
depends only on the word stream, the rating, and its own state.
"""

from __future__ import annotations

import numpy as np

from .cell import DEFAULT_CELL_CLIP, GLSTMParams, GLSTMState, glstm_forward
from .numerics import ShapeError, matvec, sigmoid, softmax

MASK_NORMS = ("none", "softmax", "sigmoid")


class ConfigError(ValueError):
    """Inconsistent model configuration."""


def normalize_mask(m: np.ndarray, mode: str) -> np.ndarray:
    """Optional squashing of the raw mask; 'none' is the default path."""
    if mode == "none":
        return m
    if mode == "softmax":
        return softmax(m)
    if mode == "sigmoid":
        return sigmoid(m)
    raise ConfigError(f"unknown mask_norm {mode!r}")


def normalize_mask_backward(d_mask: np.ndarray, m: np.ndarray,
                            mode: str) -> np.ndarray:
    """Gradient of normalize_mask w.r.t. the raw hidden state."""
    if mode == "none":
        return d_mask
    if mode == "softmax":
        p = softmax(m)
        return p * (d_mask - np.dot(d_mask, p))
    if mode == "sigmoid":
        s = sigmoid(m)
        return d_mask * s * (1.0 - s)
    raise ConfigError(f"unknown mask_norm {mode!r}")


def attention_mask(lower: GLSTMParams, state: GLSTMState, x_t: np.ndarray,
                   g: np.ndarray, cell_clip: float = DEFAULT_CELL_CLIP,
                   output_tanh: bool = False, mask_norm: str = "none"):
    """One lower-layer step: returns (mask, advanced state).

    The mask is the new hidden state, optionally squashed by
    ``mask_norm``; the recurrence always threads the raw state.
    """
    new_state, _ = glstm_forward(lower, x_t, g, state,
                                 cell_clip=cell_clip, output_tanh=output_tanh)
    return normalize_mask(new_state.m, mask_norm), new_state


def fuse_guidance(f: np.ndarray, mask: np.ndarray,
                  g: np.ndarray) -> np.ndarray:
    """Masked image feature followed by the rating encoding."""
    if f.shape != mask.shape:
        raise ShapeError(
            f"fuse_guidance: feature length {f.shape[0]} != mask length "
            f"{mask.shape[0]}"
        )
    return np.concatenate([f * mask, g])


def project_feature(raw: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Linear map from the stored feature to the model's feature space."""
    return matvec(P, raw)
