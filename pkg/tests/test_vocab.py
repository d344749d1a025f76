"""Vocabulary construction, encoding and file round-trips."""

from __future__ import annotations

from collections import Counter

import numpy as np
import pytest

from lmexpand.vocab import (
    BOS,
    BOS_ID,
    EOS,
    EOS_ID,
    UNK,
    UNK_ID,
    Vocabulary,
    build_vocabulary,
    load_corpus,
    save_corpus,
)


class TestBuildVocabulary:
    def test_reserved_tokens_occupy_fixed_ids(self):
        v = build_vocabulary([["a", "b", "a"]], shortlist_size=4, full_size=10)
        assert v.words[:3] == [BOS, EOS, UNK]
        assert v.encode(BOS) == BOS_ID == 0
        assert v.encode(EOS) == EOS_ID == 1
        assert v.encode(UNK) == UNK_ID == 2

    def test_frequency_then_lexicographic_order(self):
        # a:3 b:2 c:1 -> shortlist of 5 keeps a and b, c goes to the tail
        v = build_vocabulary([["a", "b", "a", "c", "a", "b"]], 5, 10)
        assert v.words == [BOS, EOS, UNK, "a", "b", "c"]
        assert v.shortlist_size == 5
        assert v.shortlist_words == [BOS, EOS, UNK, "a", "b"]
        assert v.tail_words == ["c"]

    def test_tie_broken_lexicographically(self):
        # b:2 c:2 d:1, one content slot in the shortlist -> "b" wins the tie
        v = build_vocabulary([["b", "c", "b", "c", "d"]], 4, 10)
        assert v.words == [BOS, EOS, UNK, "b", "c", "d"]
        assert v.shortlist_size == 4

    def test_shortlist_shrinks_to_existing_words(self):
        v = build_vocabulary([["x", "y", "z"]], shortlist_size=100, full_size=100)
        assert len(v) == 6
        assert v.shortlist_size == 6
        assert v.tail_words == []

    def test_full_size_truncates_tail(self):
        corpus = [["a", "a", "b", "b", "c", "d"]]
        v = build_vocabulary(corpus, 4, 5)
        # full_size 5 keeps reserved + a + b; c and d fall out entirely
        assert v.words == [BOS, EOS, UNK, "a", "b"]
        assert v.encode("c") == UNK_ID

    def test_frequency_invariant_over_random_corpora(self):
        rng = np.random.default_rng(7)
        alphabet = [f"w{i}" for i in range(30)]
        for _ in range(25):
            n = int(rng.integers(5, 200))
            tokens = [alphabet[int(i)] for i in rng.integers(0, len(alphabet), n)]
            corpus = [tokens[i : i + 7] for i in range(0, n, 7)]
            shortlist = int(rng.integers(3, 20))
            full = shortlist + int(rng.integers(0, 15))
            v = build_vocabulary(corpus, shortlist, full)
            counts = Counter(t for s in corpus for t in s)
            short_min = min(
                (counts[w] for w in v.shortlist_words[3:]), default=None
            )
            tail_max = max((counts[w] for w in v.tail_words), default=None)
            if short_min is not None and tail_max is not None:
                assert short_min >= tail_max

    def test_reserved_tokens_in_corpus_are_not_duplicated(self):
        v = build_vocabulary([[UNK, "a", UNK, "a"]], 5, 10)
        assert v.words.count(UNK) == 1
        assert v.words == [BOS, EOS, UNK, "a"]

    def test_errors(self):
        with pytest.raises(ValueError):
            build_vocabulary([], 5, 10)
        with pytest.raises(ValueError):
            build_vocabulary([["a"]], 2, 10)
        with pytest.raises(ValueError):
            build_vocabulary([["a"]], 6, 5)


class TestEncodeDecode:
    def setup_method(self):
        self.v = build_vocabulary([["a", "b", "a", "c", "a", "b"]], 5, 10)

    def test_encode_absent_token_is_unk(self):
        assert self.v.encode("zzz", shortlist_only=True) == UNK_ID
        assert self.v.encode("zzz") == UNK_ID

    def test_encode_tail_token(self):
        assert self.v.encode("c") == 5
        assert self.v.encode("c", shortlist_only=True) == UNK_ID

    def test_roundtrip_all_ids(self):
        for idx, word in enumerate(self.v.words):
            assert self.v.encode(word) == idx
            assert self.v.decode(idx) == word

    def test_decode_out_of_range(self):
        with pytest.raises(IndexError):
            self.v.decode(len(self.v))
        with pytest.raises(IndexError):
            self.v.decode(-1)

    def test_is_shortlist(self):
        assert self.v.is_shortlist("a")
        assert self.v.is_shortlist(UNK)
        assert not self.v.is_shortlist("c")
        assert not self.v.is_shortlist("zzz")


class TestVocabularyFile:
    def test_round_trip(self, tmp_path):
        v = build_vocabulary([["a", "b", "a", "c"]], 4, 10)
        path = tmp_path / "vocab.txt"
        v.save(path)
        again = Vocabulary.load(path)
        assert again == v

    def test_rebuild_is_byte_identical(self, tmp_path):
        corpus = [["a", "b", "c", "a"], ["b", "a"]]
        p1, p2 = tmp_path / "v1.txt", tmp_path / "v2.txt"
        build_vocabulary(corpus, 5, 8).save(p1)
        build_vocabulary(corpus, 5, 8).save(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_format(self, tmp_path):
        v = build_vocabulary([["a"]], 3, 10)
        path = tmp_path / "vocab.txt"
        v.save(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "#shortlist=3"
        assert lines[1:] == v.words

    def test_missing_header_rejected(self):
        with pytest.raises(ValueError):
            Vocabulary.from_text("<s>\n</s>\n<unk>\n")

    def test_bad_constructions(self):
        with pytest.raises(ValueError):
            Vocabulary(["a", "b", "c"], 3)  # reserved tokens missing
        with pytest.raises(ValueError):
            Vocabulary([BOS, EOS, UNK, "a", "a"], 4)  # duplicate
        with pytest.raises(ValueError):
            Vocabulary([BOS, EOS, UNK], 2)  # boundary below reserved block


class TestCorpusIO:
    def test_round_trip_skips_blank_lines(self, tmp_path):
        path = tmp_path / "corpus.txt"
        path.write_text("a b c\n\nd e\n   \n", encoding="utf-8")
        assert load_corpus(path) == [["a", "b", "c"], ["d", "e"]]

    def test_save_then_load(self, tmp_path):
        corpus = [["x", "y"], ["z"]]
        path = tmp_path / "c.txt"
        save_corpus(corpus, path)
        assert load_corpus(path) == corpus

    def test_empty_corpus_rejected(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("\n\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_corpus(path)
