import json
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from reviewgen.numerics import RngState
from reviewgen.textdata import BOS_ID, EOS_ID, PAD_ID, UNK_ID, DataError, \
    Vocabulary, build_vocab, detokenize, encode_rating, load_dataset, \
    load_embeddings, rating_dim, read_features, tokenize, write_features

words = st.text(alphabet=st.sampled_from("abcdefgh'"), min_size=1, max_size=6)


class TestTokenize:
    @pytest.mark.parametrize("text,expected", [
        ("I love it.", ["i", "love", "it", "."]),
        ("", []),
        ("Don't buy!!", ["don't", "buy", "!", "!"]),
        ("Great camera; works fine, really!",
         ["great", "camera", ";", "works", "fine", ",", "really", "!"]),
        ("  spaced\tout\nwords  ", ["spaced", "out", "words"]),
        ("a.b", ["a", ".", "b"]),
        ("...", [".", ".", "."]),
    ])
    def test_cases(self, text, expected):
        assert tokenize(text) == expected

    def test_idempotent_on_joined_output(self):
        text = "Don't worry; it's fine, really!"
        once = tokenize(text)
        assert tokenize(" ".join(once)) == once

    @given(st.text(max_size=80))
    def test_tokens_never_empty_or_uppercase(self, text):
        for tok in tokenize(text):
            assert tok
            assert tok == tok.lower()

    def test_detokenize_attaches_punctuation(self):
        assert detokenize(["i", "love", "it", "."]) == "i love it."
        assert detokenize(["don't", "buy", "!", "!"]) == "don't buy!!"
        assert detokenize([]) == ""


class TestVocabulary:
    def test_reserved_layout(self):
        v = build_vocab([], 1)
        assert len(v) == 4
        assert v.id_to_token[:4] == ["<pad>", "<bos>", "<eos>", "<unk>"]
        assert (PAD_ID, BOS_ID, EOS_ID, UNK_ID) == (0, 1, 2, 3)

    def test_ordering_frequency_then_token(self):
        v = build_vocab([["a", "b", "a"]], 1)
        assert v.id_of("a") == 4
        assert v.id_of("b") == 5

    def test_min_count_filters(self):
        v = build_vocab([["a", "b", "a"]], 2)
        assert v.id_of("a") == 4
        assert v.id_of("b") == UNK_ID

    def test_tie_broken_alphabetically(self):
        v = build_vocab([["pear", "apple", "mango"]], 1)
        assert [v.id_to_token[i] for i in (4, 5, 6)] == \
            ["apple", "mango", "pear"]

    def test_encode_brackets_and_decode_strips(self):
        v = build_vocab([["good", "stuff"]], 1)
        ids = v.encode(["good", "stuff"])
        assert ids[0] == BOS_ID and ids[-1] == EOS_ID
        assert v.decode(ids) == ["good", "stuff"]

    def test_unknown_words_map_to_unk(self):
        v = build_vocab([["known"]], 1)
        assert v.id_of("unseen") == UNK_ID

    def test_json_round_trip(self):
        v = build_vocab([["x", "y", "x"]], 1)
        w = Vocabulary.from_json(v.to_json())
        assert w.id_to_token == v.id_to_token
        assert w.id_of("y") == v.id_of("y")

    @given(st.lists(words, min_size=1, max_size=20))
    def test_round_trip_identity_for_in_vocab(self, corpus_words):
        v = build_vocab([corpus_words], 1)
        for w in corpus_words:
            assert v.id_to_token[v.id_of(w)] == w


class TestRatingEncoding:
    @pytest.mark.parametrize("r,expected", [
        (1, [1, 0, 0, 0, 0]),
        (3, [0, 0, 1, 0, 0]),
        (5, [0, 0, 0, 0, 1]),
    ])
    def test_onehot(self, r, expected):
        np.testing.assert_array_equal(encode_rating(r, "onehot"), expected)

    def test_scalar_mode_centered(self):
        assert encode_rating(3, "scalar")[0] == 0.0
        assert encode_rating(5, "scalar")[0] == 1.0
        assert encode_rating(1, "scalar")[0] == -1.0
        assert rating_dim("scalar") == 1 and rating_dim("onehot") == 5

    @pytest.mark.parametrize("bad", [0, 6, -1, 100])
    def test_out_of_range(self, bad):
        with pytest.raises(DataError):
            encode_rating(bad)


class TestFeatureFile:
    def test_round_trip_values_and_order(self, tmp_path):
        rng = RngState(0)
        feats = {"p-1": rng.uniform(8, -1, 1), "p-2": rng.uniform(8, -1, 1)}
        path = tmp_path / "f.bin"
        write_features(path, feats)
        back = read_features(path)
        assert list(back) == ["p-1", "p-2"]
        for pid in feats:
            # storage is float32; loaded doubles equal the widened floats
            np.testing.assert_array_equal(
                back[pid], feats[pid].astype(np.float32).astype(np.float64))

    def test_dim_check(self, tmp_path):
        path = tmp_path / "f.bin"
        write_features(path, {"p": np.zeros(8)})
        with pytest.raises(DataError, match="dim 8 != configured dim 16"):
            read_features(path, expect_dim=16)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "f.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(DataError, match="magic"):
            read_features(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "f.bin"
        write_features(path, {"p": np.zeros(8)})
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(DataError, match="truncated"):
            read_features(path)

    def test_unicode_ids(self, tmp_path):
        path = tmp_path / "f.bin"
        write_features(path, {"café": np.ones(3)})
        assert list(read_features(path)) == ["café"]

    def test_header_layout(self, tmp_path):
        path = tmp_path / "f.bin"
        write_features(path, {"ab": np.zeros(2)})
        raw = path.read_bytes()
        assert raw[:4] == b"IMGF"
        assert struct.unpack_from("<II", raw, 4) == (1, 2)
        assert struct.unpack_from("<H", raw, 12) == (2,)


class TestEmbeddings:
    def test_rows_loaded_missing_zero(self, tmp_path):
        v = build_vocab([["alpha", "beta"]], 1)
        path = tmp_path / "emb.txt"
        path.write_text("alpha 1.0 2.0\nother 9.0 9.0\n")
        table = load_embeddings(path, v, 2)
        np.testing.assert_array_equal(table.weights[v.id_of("alpha")], [1, 2])
        np.testing.assert_array_equal(table.weights[v.id_of("beta")], [0, 0])
        assert table.weights.shape == (len(v), 2)

    def test_dim_mismatch_names_line(self, tmp_path):
        v = build_vocab([["alpha"]], 1)
        path = tmp_path / "emb.txt"
        path.write_text("alpha 1.0 2.0 3.0\n")
        with pytest.raises(DataError, match="1"):
            load_embeddings(path, v, 2)


def _write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


class TestLoadDataset:
    def test_tiny_fixture_stats(self, fixtures_dir):
        res = load_dataset(fixtures_dir / "tiny_reviews.jsonl",
                           fixtures_dir / "tiny_features.bin", min_count=1)
        assert res.stats.total == 3
        assert res.stats.kept == 1
        assert res.stats.dropped_overlong == 1
        assert res.stats.dropped_missing_feature == 1
        assert res.examples[0].product_id == "t-1"

    def test_length_boundary(self, tmp_path):
        rows = [
            {"product_id": "p", "rating": 5, "review": " ".join(["w"] * 100)},
            {"product_id": "p", "rating": 5, "review": " ".join(["w"] * 101)},
        ]
        _write_jsonl(tmp_path / "r.jsonl", rows)
        write_features(tmp_path / "f.bin", {"p": np.zeros(4)})
        res = load_dataset(tmp_path / "r.jsonl", tmp_path / "f.bin",
                           min_count=1)
        assert res.stats.kept == 1
        assert res.stats.dropped_overlong == 1
        assert res.examples[0].length == 100

    def test_integral_float_rating_accepted(self, tmp_path):
        _write_jsonl(tmp_path / "r.jsonl",
                     [{"product_id": "p", "rating": 5.0, "review": "ok"}])
        write_features(tmp_path / "f.bin", {"p": np.zeros(4)})
        res = load_dataset(tmp_path / "r.jsonl", tmp_path / "f.bin",
                           min_count=1)
        assert res.examples[0].rating == 5

    @pytest.mark.parametrize("rating", [0, 6, 4.5, "5", True])
    def test_bad_rating_rejected_with_line(self, tmp_path, rating):
        _write_jsonl(tmp_path / "r.jsonl",
                     [{"product_id": "p", "rating": rating, "review": "ok"}])
        write_features(tmp_path / "f.bin", {"p": np.zeros(4)})
        with pytest.raises(DataError, match=r"r\.jsonl:1"):
            load_dataset(tmp_path / "r.jsonl", tmp_path / "f.bin",
                         min_count=1)

    def test_malformed_json_names_line(self, tmp_path):
        with open(tmp_path / "r.jsonl", "w") as fh:
            fh.write('{"product_id": "p", "rating": 5, "review": "ok"}\n')
            fh.write("not json\n")
        write_features(tmp_path / "f.bin", {"p": np.zeros(4)})
        with pytest.raises(DataError, match=r"r\.jsonl:2"):
            load_dataset(tmp_path / "r.jsonl", tmp_path / "f.bin",
                         min_count=1)

    def test_missing_key_rejected(self, tmp_path):
        _write_jsonl(tmp_path / "r.jsonl", [{"product_id": "p", "rating": 5}])
        write_features(tmp_path / "f.bin", {"p": np.zeros(4)})
        with pytest.raises(DataError, match="review"):
            load_dataset(tmp_path / "r.jsonl", tmp_path / "f.bin",
                         min_count=1)

    def test_examples_are_bracketed_ids(self, toy_corpus):
        for ex in toy_corpus.examples:
            assert ex.tokens[0] == BOS_ID
            assert ex.tokens[-1] == EOS_ID
            assert UNK_ID not in ex.tokens    # min_count=1 keeps every word
            assert 1 <= ex.rating <= 5
            assert ex.feature.shape == (32,)

    def test_feature_dim_enforced(self, fixtures_dir):
        with pytest.raises(DataError, match="dim 32 != configured dim 16"):
            load_dataset(fixtures_dir / "reviews.jsonl",
                         fixtures_dir / "features.bin", feature_dim=16,
                         min_count=1)

    def test_existing_vocab_reused(self, tmp_path):
        _write_jsonl(tmp_path / "r.jsonl",
                     [{"product_id": "p", "rating": 2, "review": "new words"}])
        write_features(tmp_path / "f.bin", {"p": np.zeros(4)})
        vocab = build_vocab([["other"]], 1)
        res = load_dataset(tmp_path / "r.jsonl", tmp_path / "f.bin",
                           vocab=vocab, min_count=1)
        assert res.vocab is vocab
        # both words are out of the provided vocabulary
        assert res.examples[0].tokens[1:-1] == [UNK_ID, UNK_ID]
