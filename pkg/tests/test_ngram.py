"""Modified Kneser-Ney estimation against a brute-force reference, plus ARPA I/O.

The reference below recomputes every quantity from raw counts on each call:
no tables, no sharing with the production code.  Formulas: three discounts
per order from counts-of-counts (fallback 0.5 when degenerate), highest
order uses raw counts, lower orders use left-extension type counts except
for begin-of-sentence-initial grams, unigram level interpolates with the
uniform distribution over all predictable words.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter

import numpy as np
import pytest

from lmexpand.ngram import (
    ArpaParseError,
    NgramModel,
    export_arpa,
    import_arpa,
    ngram_perplexity,
    train_kn,
)
from lmexpand.vocab import BOS_ID, EOS_ID, UNK_ID, Vocabulary, build_vocabulary


# ---------------------------------------------------------------- reference


def _ref_raw_counts(encoded, order):
    raw = {k: Counter() for k in range(1, order + 2)}
    for ids in encoded:
        padded = [BOS_ID] + ids + [EOS_ID]
        for k in range(1, order + 1):
            for i in range(len(padded) - k + 1):
                raw[k][tuple(padded[i : i + k])] += 1
    return raw


def _ref_adjusted(raw, k, order):
    if k == order:
        out = dict(raw[k])
    else:
        out = {}
        for gram, c in raw[k].items():
            if gram[0] == BOS_ID:
                out[gram] = c
            else:
                out[gram] = sum(1 for g in raw[k + 1] if g[1:] == gram)
    if k == 1:
        # the begin token is context only, never a prediction target
        out.pop((BOS_ID,), None)
    return out


def _ref_discounts(adj_values):
    n1 = sum(1 for v in adj_values if v == 1)
    n2 = sum(1 for v in adj_values if v == 2)
    n3 = sum(1 for v in adj_values if v == 3)
    n4 = sum(1 for v in adj_values if v == 4)
    if min(n1, n2, n3, n4) == 0:
        return 0.5, 0.5, 0.5
    y = n1 / (n1 + 2 * n2)
    d1, d2, d3 = 1 - 2 * y * n2 / n1, 2 - 3 * y * n3 / n2, 3 - 4 * y * n4 / n3
    if d1 <= 0 or d2 <= 0 or d3 <= 0:
        return 0.5, 0.5, 0.5
    return d1, d2, d3


def ref_kn_prob(encoded, vocab_size, order, word, context):
    """Brute-force interpolated modified Kneser-Ney P(word | context)."""
    raw = _ref_raw_counts(encoded, order)
    n_pred = vocab_size - 1  # everything except the begin token

    def prob(w, h):
        k = len(h) + 1
        adj = _ref_adjusted(raw, k, order)
        d = _ref_discounts([v for g, v in adj.items() if v >= 1])
        followers = {g[-1]: v for g, v in adj.items() if g[:-1] == h}
        total = sum(followers.values())
        lower = prob(w, h[1:]) if k > 1 else 1.0 / n_pred
        if total == 0:
            return lower
        n1c = sum(1 for v in followers.values() if v == 1)
        n2c = sum(1 for v in followers.values() if v == 2)
        n3c = sum(1 for v in followers.values() if v >= 3)
        gamma = (d[0] * n1c + d[1] * n2c + d[2] * n3c) / total
        a = followers.get(w, 0)
        disc = 0.0 if a == 0 else d[0] if a == 1 else d[1] if a == 2 else d[2]
        return max(a - disc, 0.0) / total + gamma * lower

    h = tuple(context)[-(order - 1) :] if order > 1 else ()
    return prob(word, h)


def _encode_corpus(corpus, vocab):
    return [[vocab.encode(t) for t in s] for s in corpus]


# ------------------------------------------------------------------- tests


TOY = [["a", "b", "a", "b"], ["a", "c", "b"]]


@pytest.fixture
def toy_vocab():
    return build_vocabulary(TOY, shortlist_size=5, full_size=10)


def test_bigram_matches_reference_on_toy_corpus(toy_vocab):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = train_kn(TOY, toy_vocab, order=2)
    encoded = _encode_corpus(TOY, toy_vocab)
    a, b = toy_vocab.encode("a"), toy_vocab.encode("b")
    for word, ctx in [
        (b, (a,)),
        (a, (BOS_ID,)),
        (EOS_ID, (b,)),
        (toy_vocab.encode("c"), (a,)),
        (UNK_ID, (b,)),
        (a, ()),
    ]:
        expected = ref_kn_prob(encoded, len(toy_vocab), 2, word, ctx)
        got = model.conditional_prob(word, ctx)
        assert got == pytest.approx(expected, abs=1e-9), (word, ctx)


@pytest.mark.parametrize("order", [1, 2, 3, 5])
def test_all_orders_match_reference_everywhere(order):
    corpus = [
        ["d", "a", "b", "a"],
        ["a", "b", "c", "d", "a"],
        ["c", "a", "b"],
        ["b", "b", "a", "c"],
    ]
    vocab = build_vocabulary(corpus, 5, 10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = train_kn(corpus, vocab, order=order)
    encoded = _encode_corpus(corpus, vocab)
    contexts = [()]
    for ids in encoded:
        padded = [BOS_ID] + ids + [EOS_ID]
        for i in range(len(padded)):
            for k in range(1, order):
                if i >= k:
                    contexts.append(tuple(padded[i - k : i]))
    for ctx in set(contexts):
        for word in range(1, len(vocab)):
            expected = ref_kn_prob(encoded, len(vocab), order, word, ctx)
            got = model.conditional_prob(word, ctx)
            assert got == pytest.approx(expected, rel=1e-9, abs=1e-12), (word, ctx)


def test_unseen_bigram_backs_off_exactly(toy_vocab):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = train_kn(TOY, toy_vocab, order=2)
    a = toy_vocab.encode("a")
    c = toy_vocab.encode("c")
    # (c, a) never occurs: probability must be backoff_weight(c) * P(a)
    assert (c, a) not in model.probs[1]
    expected = math.exp(model.backoffs[0][(c,)]) * model.conditional_prob(a)
    assert model.conditional_prob(a, (c,)) == pytest.approx(expected, rel=1e-12)


def test_every_vocab_word_strictly_positive(toy_vocab):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = train_kn(TOY, toy_vocab, order=3)
    for ctx in [(), (toy_vocab.encode("a"),), (BOS_ID, toy_vocab.encode("a"))]:
        for wid in range(1, len(toy_vocab)):
            assert model.conditional_prob(wid, ctx) > 0.0


def test_normalization_over_sampled_contexts():
    rng = np.random.default_rng(11)
    alphabet = [f"w{i}" for i in range(12)]
    corpus = [
        [alphabet[int(j)] for j in rng.integers(0, 12, int(rng.integers(2, 9)))]
        for _ in range(60)
    ]
    vocab = build_vocabulary(corpus, 8, 20)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = train_kn(corpus, vocab, order=4)
    encoded = _encode_corpus(corpus, vocab)
    positions = []
    for ids in encoded:
        padded = [BOS_ID] + ids + [EOS_ID]
        for i in range(1, len(padded)):
            positions.append(tuple(padded[max(0, i - 3) : i]))
    rng.shuffle(positions)
    for ctx in positions[:100]:
        total = sum(
            model.conditional_prob(wid, ctx) for wid in range(1, len(vocab))
        )
        assert total == pytest.approx(1.0, abs=1e-6), ctx


def test_unigram_model_every_word_once_is_near_uniform():
    corpus = [["a", "b"], ["c", "d"]]
    vocab = build_vocabulary(corpus, 7, 7)
    with pytest.warns(RuntimeWarning):
        model = train_kn(corpus, vocab, order=1)
    probs = [model.conditional_prob(vocab.encode(w)) for w in ["a", "b", "c", "d"]]
    assert max(probs) == pytest.approx(min(probs), rel=1e-12)
    # the unknown word receives only redistributed mass, strictly less
    assert model.conditional_prob(UNK_ID) < min(probs)


def test_more_copies_never_decrease_conditional_probability():
    base = [["a", "b", "c"], ["b", "a", "c"], ["c", "a", "b", "a"]]
    vocab = build_vocabulary(base, 6, 10)
    a, b = vocab.encode("a"), vocab.encode("b")
    last = 0.0
    for copies in range(1, 6):
        corpus = base + [["a", "b"]] * copies
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            model = train_kn(corpus, vocab, order=2)
        p = model.conditional_prob(b, (a,))
        assert p >= last - 1e-12
        last = p


def test_degenerate_counts_warn():
    with pytest.warns(RuntimeWarning, match="0.5"):
        train_kn([["a", "b"]], build_vocabulary([["a", "b"]], 5, 5), order=2)


class TestArpa:
    def test_round_trip_within_tolerance(self, tmp_path, toy_vocab):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            model = train_kn(TOY, toy_vocab, order=3)
        path = tmp_path / "model.arpa"
        export_arpa(model, path)
        again = import_arpa(path)
        assert again.order == model.order
        assert again.vocab.words == model.vocab.words
        for k in range(model.order):
            assert set(again.probs[k]) == set(model.probs[k])
            for gram, lp in model.probs[k].items():
                # 1e-6 in log10 units
                assert abs(again.probs[k][gram] - lp) / math.log(10) < 1e-6
        for k in range(model.order - 1):
            for ctx, bow in model.backoffs[k].items():
                assert abs(again.backoffs[k].get(ctx, 0.0) - bow) / math.log(10) < 1e-6

    def test_scores_survive_round_trip(self, tmp_path, toy_vocab):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            model = train_kn(TOY, toy_vocab, order=2)
        path = tmp_path / "model.arpa"
        export_arpa(model, path)
        again = import_arpa(path)
        for sentence in TOY + [["a", "zzz", "b"]]:
            assert again.sentence_logprob(sentence) == pytest.approx(
                model.sentence_logprob(sentence), abs=1e-5
            )

    def test_hand_written_unigram_arpa(self, tmp_path):
        text = (
            "\\data\\\n"
            "ngram 1=2\n"
            "\n"
            "\\1-grams:\n"
            "-0.301030\tyes\n"
            "-0.698970\tno\n"
            "\n"
            "\\end\\\n"
        )
        path = tmp_path / "tiny.arpa"
        path.write_text(text)
        model = import_arpa(path)
        yes = model.vocab.encode("yes")
        no = model.vocab.encode("no")
        assert model.conditional_prob(yes) == pytest.approx(0.5, rel=1e-5)
        assert model.conditional_prob(no) == pytest.approx(0.2, rel=1e-4)

    def test_missing_end_marker(self, tmp_path):
        path = tmp_path / "bad.arpa"
        path.write_text("\\data\\\nngram 1=1\n\n\\1-grams:\n-0.5\tx\n")
        with pytest.raises(ArpaParseError):
            import_arpa(path)

    def test_malformed_entry_reports_line(self, tmp_path):
        path = tmp_path / "bad.arpa"
        path.write_text("\\data\\\nngram 1=1\n\n\\1-grams:\nnot-a-number x y z w\n\n\\end\\\n")
        with pytest.raises(ArpaParseError, match="line 5"):
            import_arpa(path)

    def test_count_mismatch_detected(self, tmp_path):
        path = tmp_path / "bad.arpa"
        path.write_text(
            "\\data\\\nngram 1=3\n\n\\1-grams:\n-0.5\tx\n-0.5\ty\n\n\\end\\\n"
        )
        with pytest.raises(ArpaParseError):
            import_arpa(path)


def test_perplexity_matches_manual_chain(toy_vocab):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = train_kn(TOY, toy_vocab, order=2)
    test = [["a", "b"], ["b"]]
    total, n = 0.0, 0
    for sent in test:
        lps = model.sentence_logprobs(sent)
        assert len(lps) == len(sent) + 1  # end-of-sentence included
        total += sum(lps)
        n += len(lps)
    assert ngram_perplexity(model, test) == pytest.approx(math.exp(-total / n))


def test_order_one_errors():
    with pytest.raises(ValueError):
        train_kn([["a"]], build_vocabulary([["a"]], 4, 4), order=0)
    with pytest.raises(ValueError):
        train_kn([], build_vocabulary([["a"]], 4, 4), order=2)
