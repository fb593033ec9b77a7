"""Decoding reviews from a trained model: greedy and beam search, plus
the lexicon-based sentiment comparison between rating-1 and rating-5
generations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ReviewModel, initial_states, model_step, prepare_feature
from .textdata import BOS_ID, EOS_ID, UNK_ID, Vocabulary, detokenize, \
    encode_rating

DEFAULT_MAX_LEN = 100

GENERATION_MODES = ("greedy", "beam")


class GenerationError(RuntimeError):
    pass


@dataclass
class GenerationConfig:
    mode: str = "greedy"
    beam_width: int = 1
    max_len: int = DEFAULT_MAX_LEN
    seed: int = 0      # reserved for sampling; current modes are deterministic

    def validate(self):
        if self.mode not in GENERATION_MODES:
            raise ValueError(f"mode must be one of {GENERATION_MODES}, "
                             f"got {self.mode!r}")
        if self.beam_width < 1:
            raise ValueError(f"beam_width must be >= 1, got {self.beam_width}")
        if self.max_len < 1:
            raise ValueError(f"max_len must be >= 1, got {self.max_len}")


@dataclass
class GeneratedReview:
    token_ids: list[int]
    text: str
    step_log_probs: list[float]
    total_log_prob: float

    def to_json(self) -> dict:
        return {
            "token_ids": list(self.token_ids),
            "text": self.text,
            "step_log_probs": list(self.step_log_probs),
            "total_log_prob": self.total_log_prob,
        }


def _mask_unk(probs: np.ndarray) -> np.ndarray:
    """Zero the UNK slot and renormalize; generation never emits UNK."""
    kept = 1.0 - probs[UNK_ID]
    if kept <= 0.0:
        raise GenerationError("model places all probability on the unknown "
                              "token; nothing can be emitted")
    masked = probs / kept
    masked[UNK_ID] = 0.0
    return masked


def _finish(vocab: Vocabulary, token_ids, log_probs) -> GeneratedReview:
    words = vocab.decode(list(token_ids))
    return GeneratedReview(token_ids=list(token_ids), text=detokenize(words),
                           step_log_probs=list(log_probs),
                           total_log_prob=float(sum(log_probs)))


def greedy_decode(model: ReviewModel, vocab: Vocabulary,
                  feature: np.ndarray, rating: int,
                  max_len: int = DEFAULT_MAX_LEN) -> GeneratedReview:
    """Argmax decoding, ties broken by the lowest token id.

    The emitted token feeds back as the next input to both levels; the
    output ends with EOS unless the length cap cuts it off first.
    """
    f = prepare_feature(model, feature)
    g = encode_rating(rating, model.config.rating_mode)
    lower, dec = initial_states(model)
    token_ids: list[int] = []
    log_probs: list[float] = []
    current = BOS_ID
    for _ in range(max_len):
        result = model_step(model, f, g, current, lower, dec)
        probs = _mask_unk(result.probs)
        token = int(np.argmax(probs))
        token_ids.append(token)
        log_probs.append(math.log(probs[token]))
        if token == EOS_ID:
            break
        current = token
        lower, dec = result.lower_state, result.dec_state
    return _finish(vocab, token_ids, log_probs)


@dataclass
class _Hypothesis:
    tokens: tuple[int, ...]
    log_probs: tuple[float, ...]
    score: float
    next_input: int
    lower: object
    dec: object


def beam_search(model: ReviewModel, vocab: Vocabulary, feature: np.ndarray,
                rating: int, width: int, max_len: int = DEFAULT_MAX_LEN,
                top_k: int = 1) -> list[GeneratedReview]:
    """Length-wise beam over summed log-probabilities.

    Hypotheses that emit EOS (or hit the length cap) retire into a pool;
    the pool's top ``top_k`` by total log-prob come back, ties broken by
    token-id sequence order.  Width 1 reproduces greedy_decode exactly.
    """
    if width < 1:
        raise ValueError(f"beam width must be >= 1, got {width}")
    f = prepare_feature(model, feature)
    g = encode_rating(rating, model.config.rating_mode)
    lower, dec = initial_states(model)
    active = [_Hypothesis(tokens=(), log_probs=(), score=0.0,
                          next_input=BOS_ID, lower=lower, dec=dec)]
    pool: list[_Hypothesis] = []
    for _ in range(max_len):
        if not active:
            break
        candidates: list[_Hypothesis] = []
        for hyp in active:
            result = model_step(model, f, g, hyp.next_input,
                                hyp.lower, hyp.dec)
            probs = _mask_unk(result.probs)
            with np.errstate(divide="ignore"):
                log_probs = np.log(probs)
            for token in range(probs.shape[0]):
                lp = float(log_probs[token])
                if lp == -math.inf:
                    continue
                candidates.append(_Hypothesis(
                    tokens=hyp.tokens + (token,),
                    log_probs=hyp.log_probs + (lp,),
                    score=hyp.score + lp,
                    next_input=token,
                    lower=result.lower_state, dec=result.dec_state))
        candidates.sort(key=lambda h: (-h.score, h.tokens))
        active = []
        for cand in candidates[:width]:
            if cand.tokens[-1] == EOS_ID:
                pool.append(cand)
            else:
                active.append(cand)
    pool.extend(active)      # length-capped survivors
    pool.sort(key=lambda h: (-h.score, h.tokens))
    return [_finish(vocab, h.tokens, h.log_probs) for h in pool[:top_k]]


def generate(model: ReviewModel, vocab: Vocabulary, feature: np.ndarray,
             rating: int, cfg: GenerationConfig | None = None) -> GeneratedReview:
    """Decode one review for (feature, rating) under the config's mode."""
    cfg = cfg or GenerationConfig()
    cfg.validate()
    if cfg.mode == "greedy":
        return greedy_decode(model, vocab, feature, rating,
                             max_len=cfg.max_len)
    results = beam_search(model, vocab, feature, rating,
                          width=cfg.beam_width, max_len=cfg.max_len, top_k=1)
    return results[0]


# --- sentiment comparison --------------------------------------------------

def load_lexicon(path) -> frozenset[str]:
    """One token per line; blank lines skipped, tokens lowercased."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if word:
                words.add(word)
    return frozenset(words)


def lexicon_frequency(words: list[str], lexicon: frozenset[str]) -> float:
    """Fraction of the words that appear in the lexicon (0 if empty)."""
    if not words:
        return 0.0
    return sum(1 for w in words if w in lexicon) / len(words)


@dataclass
class SentimentReport:
    high_rating: int
    low_rating: int
    high: GeneratedReview
    low: GeneratedReview
    pos_freq_high: float
    neg_freq_high: float
    pos_freq_low: float
    neg_freq_low: float
    divergence: float

    def to_json(self) -> dict:
        return {
            "high_rating": self.high_rating,
            "low_rating": self.low_rating,
            "high": self.high.to_json(),
            "low": self.low.to_json(),
            "pos_freq_high": self.pos_freq_high,
            "neg_freq_high": self.neg_freq_high,
            "pos_freq_low": self.pos_freq_low,
            "neg_freq_low": self.neg_freq_low,
            "divergence": self.divergence,
        }


def sentiment_divergence(model: ReviewModel, vocab: Vocabulary,
                         feature: np.ndarray,
                         pos_lexicon: frozenset[str],
                         neg_lexicon: frozenset[str],
                         cfg: GenerationConfig | None = None,
                         high_rating: int = 5,
                         low_rating: int = 1) -> SentimentReport:
    """Decode the same feature under a high and a low rating and contrast
    lexicon hit rates.

    divergence = (pos_high - neg_high) - (pos_low - neg_low); a model
    that follows its rating guidance should push this positive.
    """
    high = generate(model, vocab, feature, high_rating, cfg)
    low = generate(model, vocab, feature, low_rating, cfg)
    high_words = vocab.decode(high.token_ids)
    low_words = vocab.decode(low.token_ids)
    pos_high = lexicon_frequency(high_words, pos_lexicon)
    neg_high = lexicon_frequency(high_words, neg_lexicon)
    pos_low = lexicon_frequency(low_words, pos_lexicon)
    neg_low = lexicon_frequency(low_words, neg_lexicon)
    return SentimentReport(
        high_rating=high_rating, low_rating=low_rating,
        high=high, low=low,
        pos_freq_high=pos_high, neg_freq_high=neg_high,
        pos_freq_low=pos_low, neg_freq_low=neg_low,
        divergence=(pos_high - neg_high) - (pos_low - neg_low))
