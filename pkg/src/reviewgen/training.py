"""Teacher-forced cross-entropy training with exact backpropagation
through time, plus the finite-difference gradient checker that keeps the
analytic pass honest.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .cell import glstm_backward
from .guidance import normalize_mask_backward
from .model import ModelConfig, ReviewModel, build_model, prepare_feature, \
    run_teacher_forced
from .numerics import RngState
from .textdata import BOS_ID, EOS_ID, ReviewExample, Vocabulary

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 1
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    grad_clip_norm: float = 5.0
    seed: int = 0
    max_len: int = 100
    feat_dim: int = 32
    hidden_dim: int = 64
    embed_dim: int = 16
    min_count: int = 5

    def validate(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', "
                             f"got {self.optimizer!r}")
        for name in ("epochs", "batch_size", "max_len", "feat_dim",
                     "hidden_dim", "embed_dim", "min_count"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0 or self.grad_clip_norm <= 0:
            raise ValueError("learning_rate and grad_clip_norm must be positive")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, payload: dict) -> "TrainConfig":
        return cls(**payload)


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float           # mean over examples of per-token cross-entropy
    perplexity: float
    seconds: float

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class TrainReport:
    epochs: list[EpochStats] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.epochs[-1].mean_loss

    def write_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for stats in self.epochs:
                fh.write(json.dumps(stats.to_json(), sort_keys=True) + "\n")


def zero_gradients(model: ReviewModel) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in model.parameters()}


def sequence_loss(model: ReviewModel, example: ReviewExample):
    """Mean-token negative log-likelihood of one example and the exact
    gradients of it w.r.t. every model parameter.

    The example's tokens are teacher-forced; targets are the tokens
    shifted left by one, ending at EOS.
    """
    records = run_teacher_forced(model, example.feature, example.rating,
                                 example.tokens)
    T = len(records)
    targets = example.tokens[1:]
    loss = 0.0
    for rec, target in zip(records, targets):
        loss -= math.log(rec.probs[target])
    loss /= T

    cfg = model.config
    F = cfg.mask_dim
    f = prepare_feature(model, example.feature)
    grads = zero_gradients(model)
    W_y = model.decoder.W_y
    d_m_dec = np.zeros(cfg.hidden_dim)
    d_c_dec = np.zeros(cfg.hidden_dim)
    d_m_low = np.zeros(F)
    d_c_low = np.zeros(F)
    d_f = np.zeros(F)
    for t in range(T - 1, -1, -1):
        rec = records[t]
        d_logits = rec.probs.copy()
        d_logits[targets[t]] -= 1.0
        d_logits /= T
        grads["W_y"] += np.outer(d_logits, rec.dec_state.m)
        grads["b_y"] += d_logits
        d_m = d_logits @ W_y + d_m_dec
        dec_g, d_x_dec, d_ghat, d_prev = glstm_backward(
            model.decoder.cell, rec.dec_tape, d_m, d_c_dec)
        grads["decoder.Wx"] += dec_g.Wx
        grads["decoder.Wm"] += dec_g.Wm
        grads["decoder.Wq"] += dec_g.Wq
        grads["decoder.b"] += dec_g.b
        d_m_dec, d_c_dec = d_prev.m, d_prev.c
        d_masked = d_ghat[:F]
        d_f += d_masked * rec.mask
        d_mask = d_masked * f
        low_upstream = d_m_low + normalize_mask_backward(
            d_mask, rec.lower_state.m, cfg.mask_norm)
        low_g, d_x_low, _d_g, d_prev_low = glstm_backward(
            model.lower, rec.lower_tape, low_upstream, d_c_low)
        grads["lower.Wx"] += low_g.Wx
        grads["lower.Wm"] += low_g.Wm
        grads["lower.Wq"] += low_g.Wq
        grads["lower.b"] += low_g.b
        d_m_low, d_c_low = d_prev_low.m, d_prev_low.c
        grads["embedding"][rec.token] += d_x_dec + d_x_low
    grads["projection"] += np.outer(d_f, example.feature)
    return loss, grads


def _sequence_nll(model: ReviewModel, example: ReviewExample) -> float:
    """Forward-only loss; the finite-difference probe."""
    records = run_teacher_forced(model, example.feature, example.rating,
                                 example.tokens)
    total = 0.0
    for rec, target in zip(records, example.tokens[1:]):
        total -= math.log(rec.probs[target])
    return total / len(records)


def batch_gradients(model: ReviewModel, examples):
    """Per-example losses and gradients of the batch-mean loss.

    The batch loss is the plain mean of the per-example losses, so its
    gradient is the mean of the per-example gradients, accumulated in
    the order given.
    """
    total = zero_gradients(model)
    losses = []
    for example in examples:
        loss, grads = sequence_loss(model, example)
        losses.append(loss)
        for name in total:
            total[name] += grads[name]
    scale = 1.0 / len(examples)
    for name in total:
        total[name] *= scale
    return losses, total


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm.

    Returns the pre-clip norm; gradients at or under the bound are left
    untouched.
    """
    sq = 0.0
    for g in grads.values():
        sq += float(np.sum(g * g))
    norm = math.sqrt(sq)
    if norm > max_norm:
        factor = max_norm / norm
        for g in grads.values():
            g *= factor
    return norm


class Sgd:
    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        for name, p in params.items():
            p -= self.learning_rate * grads[name]


class Adam:
    def __init__(self, learning_rate: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        correct1 = 1.0 - b1 ** self.t
        correct2 = 1.0 - b2 ** self.t
        for name, p in params.items():
            g = grads[name]
            if name not in self._m:
                self._m[name] = np.zeros_like(p)
                self._v[name] = np.zeros_like(p)
            m = self._m[name]
            v = self._v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p -= self.learning_rate * (m / correct1) / \
                (np.sqrt(v / correct2) + self.eps)


def make_optimizer(config: TrainConfig):
    if config.optimizer == "adam":
        return Adam(config.learning_rate)
    return Sgd(config.learning_rate)


def train(examples, vocab: Vocabulary, config: TrainConfig,
          checkpoint_path=None, report_path=None,
          embedding_init: np.ndarray | None = None,
          train_embedding: bool = True):
    """Fit the bilevel model on the examples; returns (model, report).

    Deterministic for a fixed seed: initialization and the per-epoch
    shuffle both come from the seed's splitmix stream.  The checkpoint,
    when a path is given, is rewritten after every epoch; a non-finite
    loss aborts with the offending epoch and example named.
    """
    if not examples:
        raise ValueError("train: empty dataset")
    config.validate()
    feature_dim = examples[0].feature.shape[0]
    if feature_dim != config.feat_dim:
        raise ValueError(
            f"train: examples carry {feature_dim}-dim features, "
            f"config.feat_dim is {config.feat_dim}")
    model_config = ModelConfig(
        vocab_size=len(vocab), embed_dim=config.embed_dim,
        feature_dim=config.feat_dim, hidden_dim=config.hidden_dim,
        train_embedding=train_embedding)
    rng = RngState(config.seed)
    model = build_model(model_config, seed=rng.next_u64())
    if embedding_init is not None:
        if embedding_init.shape != model.embedding.shape:
            raise ValueError(
                f"embedding init shape {embedding_init.shape} != "
                f"{model.embedding.shape}")
        model.embedding[:] = embedding_init
    params = dict(model.parameters())
    optimizer = make_optimizer(config)
    report = TrainReport()

    from .checkpoint import save_checkpoint  # local import, no cycle at load

    n = len(examples)
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, config.batch_size):
            batch_idx = order[start:start + config.batch_size]
            batch = [examples[i] for i in batch_idx]
            losses, grads = batch_gradients(model, batch)
            for idx, loss in zip(batch_idx, losses):
                if not math.isfinite(loss):
                    raise DivergenceError(
                        f"non-finite loss at epoch {epoch}, example {idx} "
                        f"(product {examples[idx].product_id!r})")
            epoch_losses.extend(losses)
            if not model.config.train_embedding:
                grads["embedding"][:] = 0.0
            clip_gradients(grads, config.grad_clip_norm)
            optimizer.step(params, grads)
        mean_loss = sum(epoch_losses) / len(epoch_losses)
        stats = EpochStats(epoch=epoch, mean_loss=mean_loss,
                           perplexity=math.exp(mean_loss),
                           seconds=time.perf_counter() - t0)
        report.epochs.append(stats)
        log.info("epoch %d/%d loss %.4f ppl %.2f (%.2fs)", epoch,
                 config.epochs, mean_loss, stats.perplexity, stats.seconds)
        if checkpoint_path is not None:
            save_checkpoint(model, checkpoint_path, vocab=vocab,
                            train_config=config)
        if report_path is not None:
            mode = "w" if epoch == 1 else "a"
            with open(report_path, mode, encoding="utf-8") as fh:
                fh.write(json.dumps(stats.to_json(), sort_keys=True) + "\n")
    return model, report


# --- gradient checking -----------------------------------------------------

GRADCHECK_EPS = 1e-5
GRADCHECK_TOLERANCE = 1e-5
CELL_TOLERANCE = 1e-6

# Relative error floor: entries whose analytic and numeric magnitudes
# are both below this are compared on an absolute scale instead, which
# keeps finite-difference roundoff (~1e-11 here) from swamping
# genuinely tiny gradients.
_REL_FLOOR = 1e-4


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)),
                       _REL_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / denom))


def numeric_gradients(loss_fn, arrays, eps: float = GRADCHECK_EPS):
    """Central finite differences of loss_fn over each array in place."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            old = flat[k]
            flat[k] = old + eps
            up = loss_fn()
            flat[k] = old - eps
            down = loss_fn()
            flat[k] = old
            gflat[k] = (up - down) / (2.0 * eps)
        grads.append(g)
    return grads


def gradcheck_cell(input_dim: int = 4, hidden_dim: int = 4,
                   guidance_dim: int = 4, seed: int = 0,
                   output_tanh: bool = False) -> float:
    """Max relative error of one cell step's analytic gradients against
    finite differences, probing parameters and all four inputs.

    The scalar objective is a fixed random linear functional of (m, c);
    cell clipping is disabled so the function is smooth.
    """
    from .cell import GLSTMState, glstm_forward, init_glstm

    rng = RngState(seed)
    p = init_glstm(input_dim, hidden_dim, guidance_dim, 0.5, rng)
    p.b[:] = rng.uniform(4 * hidden_dim, -0.5, 0.5)
    x = rng.uniform(input_dim, -1.0, 1.0)
    g = rng.uniform(guidance_dim, -1.0, 1.0)
    prev = GLSTMState(m=rng.uniform(hidden_dim, -1.0, 1.0),
                      c=rng.uniform(hidden_dim, -1.0, 1.0))
    w_m = rng.uniform(hidden_dim, -1.0, 1.0)
    w_c = rng.uniform(hidden_dim, -1.0, 1.0)

    def loss():
        state, _ = glstm_forward(p, x, g, prev, cell_clip=0.0,
                                 output_tanh=output_tanh)
        return float(w_m @ state.m + w_c @ state.c)

    state, tape = glstm_forward(p, x, g, prev, cell_clip=0.0,
                                output_tanh=output_tanh)
    cell_grads, d_x, d_g, d_prev = glstm_backward(p, tape, w_m, w_c)
    analytic = [cell_grads.Wx, cell_grads.Wm, cell_grads.Wq, cell_grads.b,
                d_x, d_g, d_prev.m, d_prev.c]
    numeric = numeric_gradients(loss, [p.Wx, p.Wm, p.Wq, p.b,
                                       x, g, prev.m, prev.c])
    return max(max_relative_error(a, n) for a, n in zip(analytic, numeric))


def _random_check_model(vocab_size, feat_dim, hidden_dim, embed_dim,
                        seq_len, seed, mask_norm="none", output_tanh=False):
    rng = RngState(seed)
    config = ModelConfig(vocab_size=vocab_size, embed_dim=embed_dim,
                         feature_dim=feat_dim, hidden_dim=hidden_dim,
                         cell_clip=0.0, mask_norm=mask_norm,
                         output_tanh=output_tanh)
    model = build_model(config, seed=seed)
    for _, arr in model.parameters():
        arr.reshape(-1)[:] = rng.uniform(arr.size, -0.5, 0.5)
    content = [4 + rng.next_below(vocab_size - 4) for _ in range(seq_len - 1)]
    tokens = [BOS_ID] + content + [EOS_ID]
    example = ReviewExample(
        product_id="check", rating=1 + rng.next_below(5),
        tokens=tokens, feature=rng.uniform(feat_dim, -1.0, 1.0))
    return model, example


def gradcheck_model(vocab_size: int = 6, feat_dim: int = 4,
                    hidden_dim: int = 4, embed_dim: int = 4,
                    seq_len: int = 5, seed: int = 0,
                    mask_norm: str = "none",
                    output_tanh: bool = False) -> float:
    """Max relative error of the full bilevel model's gradients against
    finite differences on a random instance (clipping disabled).

    ``seq_len`` counts teacher-forcing steps, so the token list is BOS,
    seq_len - 1 content tokens, EOS.
    """
    model, example = _random_check_model(
        vocab_size, feat_dim, hidden_dim, embed_dim, seq_len, seed,
        mask_norm=mask_norm, output_tanh=output_tanh)
    _, analytic = sequence_loss(model, example)
    arrays = [arr for _, arr in model.parameters()]
    names = [name for name, _ in model.parameters()]
    numeric = numeric_gradients(lambda: _sequence_nll(model, example), arrays)
    return max(max_relative_error(analytic[name], num)
               for name, num in zip(names, numeric))


@dataclass
class GradCheckReport:
    seed: int
    cell_max_rel_err: float
    model_max_rel_err: float
    tolerance: float
    passed: bool

    def to_json(self) -> dict:
        return asdict(self)


def gradcheck(seed: int = 0, dims: tuple[int, int, int, int] = (6, 4, 4, 4),
              seq_len: int = 5,
              tolerance: float = GRADCHECK_TOLERANCE) -> GradCheckReport:
    """Check the cell alone and the full model; passes iff both max
    relative errors stay under the tolerance.

    ``dims`` is (vocab_size, feat_dim, hidden_dim, embed_dim), each
    intended to stay small (<= 8) so finite differences stay cheap.
    """
    vocab_size, feat_dim, hidden_dim, embed_dim = dims
    cell_err = gradcheck_cell(input_dim=embed_dim, hidden_dim=hidden_dim,
                              guidance_dim=feat_dim, seed=seed)
    model_err = gradcheck_model(vocab_size=vocab_size, feat_dim=feat_dim,
                                hidden_dim=hidden_dim, embed_dim=embed_dim,
                                seq_len=seq_len, seed=seed)
    return GradCheckReport(
        seed=seed, cell_max_rel_err=cell_err, model_max_rel_err=model_err,
        tolerance=tolerance,
        passed=cell_err < tolerance and model_err < tolerance)
