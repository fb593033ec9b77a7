"""One guided-LSTM recurrence step with an exact analytic backward pass.

Every gate takes three inputs: the step input x_t, the previous hidden
state, and a guidance vector.  The hidden state is read straight off the
memory cell (m = o * c, no output tanh) unless ``output_tanh`` is set.
Biases are an extension on top of the gate equations; with zero biases
the literal bias-free form is recovered.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .numerics import RngState, ShapeError, init_matrix

# packed gate order, rows of Wx/Wm/Wq and entries of b
_GATES = ("i", "f", "o", "c")

DEFAULT_CELL_CLIP = 50.0


@dataclass
class GLSTMParams:
    """Weights of one guided-LSTM layer, packed row-wise by gate.

    ``Wx`` is (4H, Dx), ``Wm`` is (4H, H), ``Wq`` is (4H, Dg), ``b`` is
    (4H,), gate order [input, forget, output, candidate].  The
    per-gate matrices (W_ix, W_fm, W_oq, ...) are exposed as row-slice
    views, so in-place edits through them hit the packed storage.
    """

    Wx: np.ndarray
    Wm: np.ndarray
    Wq: np.ndarray
    b: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.Wx.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.Wm.shape[1]

    @property
    def guidance_dim(self) -> int:
        return self.Wq.shape[1]

    def _gate_rows(self, gate: str) -> slice:
        k = _GATES.index(gate)
        H = self.hidden_dim
        return slice(k * H, (k + 1) * H)

    def __getattr__(self, name: str):
        # W_<gate><src> and b_<gate> views into the packed arrays
        if name.startswith("W_") and len(name) == 4:
            gate, src = name[2], name[3]
            if gate in _GATES and src in ("x", "m", "q"):
                packed = {"x": self.Wx, "m": self.Wm, "q": self.Wq}[src]
                return packed[self._gate_rows(gate)]
        if name.startswith("b_") and len(name) == 3 and name[2] in _GATES:
            return self.b[self._gate_rows(name[2])]
        raise AttributeError(name)

    def weights(self):
        """The four packed arrays, in a fixed order."""
        return [self.Wx, self.Wm, self.Wq, self.b]


def init_glstm(input_dim: int, hidden_dim: int, guidance_dim: int,
               scale: float, rng: RngState) -> GLSTMParams:
    """Uniform [-scale, scale] weights, zero biases.

    Fill order is Wx, Wm, Wq (each packed gate-major) so a seed pins the
    whole layer.
    """
    return GLSTMParams(
        Wx=init_matrix(4 * hidden_dim, input_dim, scale, rng),
        Wm=init_matrix(4 * hidden_dim, hidden_dim, scale, rng),
        Wq=init_matrix(4 * hidden_dim, guidance_dim, scale, rng),
        b=np.zeros(4 * hidden_dim),
    )


@dataclass
class GLSTMState:
    """Recurrent state of one layer: hidden vector m and memory cell c."""

    m: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_dim: int) -> "GLSTMState":
        return cls(m=np.zeros(hidden_dim), c=np.zeros(hidden_dim))


@dataclass
class StepTape:
    """Everything the backward pass needs from one forward step."""

    x: np.ndarray
    g: np.ndarray
    m_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    u: np.ndarray          # candidate tanh activation
    c_raw: np.ndarray      # memory cell before clipping
    c: np.ndarray          # memory cell as threaded forward
    cell_clip: float
    output_tanh: bool


@dataclass
class GLSTMGrads:
    """Gradient accumulator matching GLSTMParams' packed layout."""

    Wx: np.ndarray
    Wm: np.ndarray
    Wq: np.ndarray
    b: np.ndarray

    @classmethod
    def zeros_like(cls, p: GLSTMParams) -> "GLSTMGrads":
        return cls(np.zeros_like(p.Wx), np.zeros_like(p.Wm),
                   np.zeros_like(p.Wq), np.zeros_like(p.b))

    def accumulate(self, dWx, dWm, dWq, db):
        self.Wx += dWx
        self.Wm += dWm
        self.Wq += dWq
        self.b += db


def _check_forward_shapes(p: GLSTMParams, x, g, prev: GLSTMState):
    if x.shape[0] != p.input_dim:
        raise ShapeError(
            f"glstm_forward: x_t has length {x.shape[0]}, "
            f"W_ix expects {p.input_dim}"
        )
    if g.shape[0] != p.guidance_dim:
        raise ShapeError(
            f"glstm_forward: g_t has length {g.shape[0]}, "
            f"W_iq expects {p.guidance_dim}"
        )
    if prev.m.shape[0] != p.hidden_dim or prev.c.shape[0] != p.hidden_dim:
        raise ShapeError(
            f"glstm_forward: previous state has length "
            f"{prev.m.shape[0]}, W_im expects {p.hidden_dim}"
        )


def glstm_forward(p: GLSTMParams, x: np.ndarray, g: np.ndarray,
                  prev: GLSTMState, cell_clip: float = DEFAULT_CELL_CLIP,
                  output_tanh: bool = False) -> tuple[GLSTMState, StepTape]:
    """Advance one step: gates from (x, prev.m, g), then cell and hidden.

    i = sigma(W_ix x + W_im m_prev + W_iq g + b_i), same for f and o;
    c = f*c_prev + i*tanh(W_cx x + W_cm m_prev + W_cq g + b_c);
    m = o*c (or o*tanh(c) when ``output_tanh``).  ``cell_clip`` bounds c
    after the update; pass 0 to disable (gradient checks do).
    """
    _check_forward_shapes(p, x, g, prev)
    i, f, o, u, c_raw, c, m = kernels.glstm_step_forward(
        p.Wx, p.Wm, p.Wq, p.b, x, g, prev.m, prev.c,
        float(cell_clip), bool(output_tanh))
    tape = StepTape(x=x, g=g, m_prev=prev.m, c_prev=prev.c,
                    i=i, f=f, o=o, u=u, c_raw=c_raw, c=c,
                    cell_clip=float(cell_clip), output_tanh=bool(output_tanh))
    return GLSTMState(m=m, c=c), tape


def glstm_backward(p: GLSTMParams, tape: StepTape, d_m: np.ndarray,
                   d_c: np.ndarray):
    """Exact gradients of a scalar loss through one recorded step.

    ``d_m`` and ``d_c`` are the loss gradients w.r.t. the step's output
    hidden state and threaded cell.  Returns
    (GLSTMGrads, d_x, d_g, GLSTMState of gradients w.r.t. prev state).
    """
    if tape.x.shape[0] != p.input_dim or tape.g.shape[0] != p.guidance_dim \
            or tape.m_prev.shape[0] != p.hidden_dim:
        raise ShapeError(
            f"glstm_backward: tape dims ({tape.x.shape[0]}, "
            f"{tape.m_prev.shape[0]}, {tape.g.shape[0]}) do not match params "
            f"({p.input_dim}, {p.hidden_dim}, {p.guidance_dim})"
        )
    dWx, dWm, dWq, db, dx, dg, dm_prev, dc_prev = kernels.glstm_step_backward(
        p.Wx, p.Wm, p.Wq, tape.x, tape.g, tape.m_prev, tape.c_prev,
        tape.i, tape.f, tape.o, tape.u, tape.c_raw, tape.c, d_m, d_c,
        tape.cell_clip, tape.output_tanh)
    grads = GLSTMGrads(Wx=dWx, Wm=dWm, Wq=dWq, b=db)
    return grads, dx, dg, GLSTMState(m=dm_prev, c=dc_prev)
