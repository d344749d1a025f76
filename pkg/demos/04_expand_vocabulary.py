"""
Growing a trained model's vocabulary without retraining
=======================================================

The trained LSTM only has explicit input/output columns for shortlist
words; everything else scores through the unknown token. This demo appends
synthesized columns for tail words, built as means of similar shortlist
words' columns, and shows three things:

  * every original word's logits are preserved bit for bit,
  * expanding the frequent tail words of the target text lowers
    full-vocabulary perplexity, and
  * expanding indiscriminately does not: each extra column also dilutes
    the softmax, so breadth without evidence cancels the gains.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from lmexpand.datagen import make_template_grammar, sample_corpus
from lmexpand.expansion import FullVocabScorer, expand_with_embeddings
from lmexpand.rnnlm import RnnState, TrainConfig, forward_step, init_model, train_bptt
from lmexpand.skipgram import SkipgramConfig, train_skipgram
from lmexpand.vocab import build_vocabulary

grammar = make_template_grammar(seed=0)
train = sample_corpus(grammar, target_tokens=80_000, seed=1)
test = sample_corpus(grammar, target_tokens=2_000, seed=3)

vocab = build_vocabulary(train, shortlist_size=300, full_size=600)
model = init_model(vocab, embed_dim=24, hidden_dim=48, num_layers=1, seed=0)
config = TrainConfig(unroll=16, dropout=0.0, lr=0.5, clip=5.0, epochs=3, batch=16, seed=0)
model, _ = train_bptt(model, train, config)
emb = train_skipgram(train, SkipgramConfig(dim=32, window=2, epochs=8, seed=0))

# tail words as they occur in the text we are about to score
tail = set(vocab.tail_words)
counts = Counter(w for sentence in test for w in sentence if w in tail)
frequent = [w for w, _ in counts.most_common(60)]
print(f"test text uses {len(counts)} distinct tail words;"
      f" expanding the {len(frequent)} most frequent")

wide, report = expand_with_embeddings(model, frequent, emb, k=8)
print(f"explicit words: {model.n_explicit} -> {wide.n_explicit}"
      f" ({len(report.expanded)} expanded, {len(report.skipped)} skipped)")
word = report.expanded[0]
print(f"candidates for {word} (class {grammar.word_class[word][0]}):",
      [f"{w} (class {grammar.word_class[w][0]})" for w, _ in report.candidates[word][:4]])

# probe any state: original logits are untouched down to the last bit
rng = np.random.default_rng(7)
state = RnnState(h=rng.normal(size=(1, 48)), c=rng.normal(size=(1, 48)))
before = forward_step(model, 5, RnnState(h=state.h.copy(), c=state.c.copy())).logits
after = forward_step(wide, 5, RnnState(h=state.h.copy(), c=state.c.copy())).logits
print("original logits bitwise unchanged:", before.tobytes() == after.tobytes()[: before.nbytes])

# full-vocabulary perplexity under the uniform policy
ppl_narrow = FullVocabScorer(model, "uniform", vocab).corpus_perplexity(test)
ppl_focused = FullVocabScorer(wide, "uniform", vocab).corpus_perplexity(test)
print(f"focused expansion:        ppl {ppl_narrow:.2f} -> {ppl_focused:.2f}"
      f" ({100 * (1 - ppl_focused / ppl_narrow):+.1f}%)")

# expanding every observed tail word adds 70+ rare columns and gives the
# dilution back; selection quality matters as much as synthesis quality
everything, _ = expand_with_embeddings(model, sorted(counts), emb, k=8)
ppl_everything = FullVocabScorer(everything, "uniform", vocab).corpus_perplexity(test)
print(f"indiscriminate expansion: ppl {ppl_narrow:.2f} -> {ppl_everything:.2f}"
      f" ({100 * (1 - ppl_everything / ppl_narrow):+.1f}%)")
