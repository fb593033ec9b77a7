"""Word decoder: a guided-LSTM whose guidance changes every step, plus a
softmax readout over the vocabulary."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cell import (DEFAULT_CELL_CLIP, GLSTMParams, GLSTMState, StepTape,
                   glstm_forward, init_glstm)
from .numerics import RngState, ShapeError, init_matrix, softmax


@dataclass
class DecoderParams:
    """Decoder cell plus the hidden-to-vocabulary projection."""

    cell: GLSTMParams
    W_y: np.ndarray    # (vocab, hidden)
    b_y: np.ndarray    # (vocab,)

    @property
    def vocab_size(self) -> int:
        return self.W_y.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.cell.hidden_dim


def init_decoder(vocab_size: int, embed_dim: int, hidden_dim: int,
                 guidance_dim: int, scale: float,
                 rng: RngState) -> DecoderParams:
    if vocab_size < 4:
        raise ShapeError(
            f"decoder: vocab_size {vocab_size} < 4 reserved control ids")
    cell = init_glstm(embed_dim, hidden_dim, guidance_dim, scale, rng)
    return DecoderParams(
        cell=cell,
        W_y=init_matrix(vocab_size, hidden_dim, scale, rng),
        b_y=np.zeros(vocab_size),
    )


def readout(p: DecoderParams, m: np.ndarray) -> np.ndarray:
    """Distribution over the vocabulary from a hidden state."""
    return softmax(p.W_y @ m + p.b_y)


def decode_step(p: DecoderParams, x_t: np.ndarray, g_hat: np.ndarray,
                prev: GLSTMState, cell_clip: float = DEFAULT_CELL_CLIP,
                output_tanh: bool = False) -> tuple[np.ndarray, GLSTMState]:
    """One decode step: cell advance under g_hat, then softmax readout.

    Returns (token distribution, new state).
    """
    state, _ = glstm_forward(p.cell, x_t, g_hat, prev,
                             cell_clip=cell_clip, output_tanh=output_tanh)
    return readout(p, state.m), state


def decode_step_taped(p: DecoderParams, x_t: np.ndarray, g_hat: np.ndarray,
                      prev: GLSTMState, cell_clip: float = DEFAULT_CELL_CLIP,
                      output_tanh: bool = False
                      ) -> tuple[np.ndarray, GLSTMState, StepTape]:
    """decode_step variant that also hands back the cell tape (training)."""
    state, tape = glstm_forward(p.cell, x_t, g_hat, prev,
                                cell_clip=cell_clip, output_tanh=output_tanh)
    return readout(p, state.m), state, tape
