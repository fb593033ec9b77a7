import numpy as np
import pytest

from reviewgen import checkpoint as ckpt_mod
from reviewgen.checkpoint import CheckpointError, ChecksumError, \
    TruncatedCheckpointError, VersionMismatchError, load_checkpoint, \
    save_checkpoint
from reviewgen.generation import greedy_decode
from reviewgen.model import ModelConfig, build_model
from reviewgen.numerics import RngState
from reviewgen.textdata import build_vocab
from reviewgen.training import TrainConfig


def _setup(seed=0):
    vocab = build_vocab([["one", "two", "three", "four"]], 1)
    config = ModelConfig(vocab_size=len(vocab), embed_dim=3, feature_dim=4,
                         hidden_dim=5, init_scale=0.6)
    return build_model(config, seed=seed), vocab


class TestRoundTrip:
    def test_tensors_bit_exact(self, tmp_path):
        model, vocab = _setup()
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path, vocab,
                        train_config=TrainConfig(epochs=7, feat_dim=4))
        loaded, loaded_vocab, tc = load_checkpoint(path)
        for (name, a), (_, b) in zip(model.parameters(),
                                     loaded.parameters()):
            np.testing.assert_array_equal(a, b, err_msg=name)
        assert loaded_vocab.id_to_token == vocab.id_to_token
        assert tc["epochs"] == 7
        assert loaded.config == model.config

    def test_loaded_tensors_writable(self, tmp_path):
        model, vocab = _setup()
        save_checkpoint(model, tmp_path / "m.ckpt", vocab)
        loaded, _, _ = load_checkpoint(tmp_path / "m.ckpt")
        loaded.embedding += 1.0     # resume-training must be possible

    def test_save_load_save_byte_identical(self, tmp_path):
        model, vocab = _setup()
        first = tmp_path / "a.ckpt"
        second = tmp_path / "b.ckpt"
        save_checkpoint(model, first, vocab,
                        train_config=TrainConfig(feat_dim=4))
        loaded, loaded_vocab, tc = load_checkpoint(first)
        save_checkpoint(loaded, second, loaded_vocab,
                        train_config=TrainConfig.from_json(tc))
        assert first.read_bytes() == second.read_bytes()

    def test_no_train_config(self, tmp_path):
        model, vocab = _setup()
        save_checkpoint(model, tmp_path / "m.ckpt", vocab)
        _, _, tc = load_checkpoint(tmp_path / "m.ckpt")
        assert tc is None

    def test_generation_preserved(self, tmp_path):
        model, vocab = _setup(seed=3)
        feature = RngState(1).uniform(4, -1.0, 1.0)
        before = greedy_decode(model, vocab, feature, 5)
        save_checkpoint(model, tmp_path / "m.ckpt", vocab)
        loaded, loaded_vocab, _ = load_checkpoint(tmp_path / "m.ckpt")
        after = greedy_decode(loaded, loaded_vocab, feature, 5)
        assert after.token_ids == before.token_ids
        assert after.text == before.text

    def test_vocab_size_mismatch_rejected_on_save(self, tmp_path):
        model, _ = _setup()
        wrong = build_vocab([["lone"]], 1)
        with pytest.raises(CheckpointError):
            save_checkpoint(model, tmp_path / "m.ckpt", wrong)


class TestCorruption:
    @pytest.fixture
    def saved(self, tmp_path):
        model, vocab = _setup()
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path, vocab)
        return path

    def test_payload_byte_flip_detected(self, saved):
        raw = bytearray(saved.read_bytes())
        raw[-40] ^= 0xFF            # inside the last tensor
        saved.write_bytes(bytes(raw))
        with pytest.raises(ChecksumError):
            load_checkpoint(saved)

    def test_header_byte_flip_detected(self, saved):
        raw = bytearray(saved.read_bytes())
        raw[20] ^= 0x01             # inside the JSON header
        saved.write_bytes(bytes(raw))
        with pytest.raises((ChecksumError, CheckpointError)):
            load_checkpoint(saved)

    def test_truncation_detected(self, saved):
        raw = saved.read_bytes()
        saved.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(TruncatedCheckpointError):
            load_checkpoint(saved)

    def test_tiny_file_rejected(self, saved):
        saved.write_bytes(b"RV")
        with pytest.raises(TruncatedCheckpointError):
            load_checkpoint(saved)

    def test_bad_magic_rejected(self, saved):
        raw = bytearray(saved.read_bytes())
        raw[:4] = b"ELF\x7f"
        saved.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(saved)

    def test_trailing_garbage_rejected(self, saved):
        saved.write_bytes(saved.read_bytes() + b"extra")
        with pytest.raises(CheckpointError, match="trailing"):
            load_checkpoint(saved)

    def test_version_mismatch_distinct(self, tmp_path, monkeypatch):
        model, vocab = _setup()
        path = tmp_path / "future.ckpt"
        monkeypatch.setattr(ckpt_mod, "FORMAT_VERSION", 2)
        save_checkpoint(model, path, vocab)
        monkeypatch.setattr(ckpt_mod, "FORMAT_VERSION", 1)
        with pytest.raises(VersionMismatchError, match="version 2"):
            load_checkpoint(path)

    def test_missing_file_is_oserror(self, tmp_path):
        with pytest.raises(OSError):
            load_checkpoint(tmp_path / "absent.ckpt")
