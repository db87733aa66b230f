import numpy as np
import pytest

from embinv.exceptions import LanguageModelError, ModelFormatError
from embinv.lm import (
    BOS,
    EOS,
    NGramLM,
    Vocabulary,
    diversity_filter,
    load_corpus,
    next_token_logits,
    train_ngram,
)
from embinv.models import AttackConfig


@pytest.fixture
def tiny_lm():
    return train_ngram(["a b", "a c"], n=2, k=1.0)


def test_vocabulary_layout(tiny_lm):
    vocab = tiny_lm.vocab
    assert vocab.tokens[:2] == [BOS, EOS]
    assert vocab.tokens[2:] == ["a", "b", "c"]
    assert np.allclose(np.linalg.norm(vocab.token_emb, axis=1), 1.0)


def test_add_k_probabilities(tiny_lm):
    """P(w|ctx) = (c + k) / (total + k·V)"""
    assert tiny_lm.probability("a", []) == pytest.approx(3 / 7)
    assert tiny_lm.probability("b", ["a"]) == pytest.approx(2 / 7)
    assert tiny_lm.probability(EOS, ["b"]) == pytest.approx(2 / 6)


def test_distribution_sums_to_one(bigram):
    vocab = bigram.vocab
    for word in ["the", "cat", "park"]:
        probs = np.exp(bigram.log_probs([vocab.bos_id, vocab.ids[word]]))
        assert probs.sum() == pytest.approx(1.0)


def test_unseen_context_backs_off():
    """Contexto nunca visto encurta até um visto (no limite, o unigrama)"""
    lm = train_ngram(["x y z"], n=3, k=0.5)
    ids, bos, eos = lm.vocab.ids, lm.vocab.bos_id, lm.vocab.eos_id
    assert lm._context_key([bos, ids["z"], ids["z"]]) == (ids["z"],)
    assert lm._context_key([bos, ids["x"], eos]) == ()

    unigram = np.exp(lm.log_probs([bos, ids["x"], eos]))
    # 4 eventos no treino: x, y, z, EOS
    assert unigram[ids["y"]] == pytest.approx((1 + 0.5) / (4 + 0.5 * len(lm.vocab)))


def test_train_errors():
    with pytest.raises(LanguageModelError, match="empty"):
        train_ngram(["   "], n=2, k=0.1)
    with pytest.raises(LanguageModelError):
        train_ngram(["a b"], n=0, k=0.1)
    with pytest.raises(LanguageModelError):
        train_ngram(["a b"], n=2, k=0.0)


def test_save_and_load(tmp_path, bigram):
    path = tmp_path / "bigram.lm"
    bigram.save(path)
    loaded = NGramLM.load(path)
    ctx = [bigram.vocab.bos_id, bigram.vocab.ids["the"]]
    assert loaded.vocab.tokens == bigram.vocab.tokens
    assert np.allclose(loaded.log_probs(ctx), bigram.log_probs(ctx))


def test_load_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.lm"
    path.write_bytes(b"not a model")
    with pytest.raises(ModelFormatError):
        NGramLM.load(path)


def test_load_corpus_skips_blank_lines(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("one\n\n  two  \n", encoding="utf-8")
    assert load_corpus(path) == ["one", "two"]


def test_logit_masks():
    """BOS e não-ASCII mascarados; não-alfabéticos penalizados só em t=1"""
    lm = train_ngram(["café 42 good", "good 42"], n=2, k=0.1)
    vocab = lm.vocab
    cfg = AttackConfig(first_step_penalty=-5.0)
    ctx = [vocab.bos_id]

    first = next_token_logits(lm, ctx, 1, cfg)
    later = next_token_logits(lm, ctx, 2, cfg)
    raw = lm.log_probs(ctx)

    assert first[vocab.bos_id] == -np.inf
    assert first[vocab.ids["café"]] == -np.inf
    assert first[vocab.ids["42"]] == pytest.approx(raw[vocab.ids["42"]] - 5.0)
    assert later[vocab.ids["42"]] == pytest.approx(raw[vocab.ids["42"]])
    assert first[vocab.ids["good"]] == pytest.approx(raw[vocab.ids["good"]])


def test_context_must_start_with_bos(tiny_lm):
    with pytest.raises(LanguageModelError, match="BOS"):
        next_token_logits(tiny_lm, [tiny_lm.vocab.ids["a"]], 1, AttackConfig())


def _manual_vocab():
    emb = np.eye(5)
    emb[4] = emb[2]  # "z" duplica "x"
    return Vocabulary(tokens=[BOS, EOS, "x", "y", "z"], token_emb=emb)


def test_diversity_filter_drops_near_duplicates():
    vocab = _manual_vocab()
    assert diversity_filter([4, 2, 3], vocab, th_w=0.9, k_s=10) == [4, 3]


def test_diversity_filter_caps_at_ks():
    vocab = _manual_vocab()
    assert diversity_filter([1, 2, 3], vocab, th_w=0.9, k_s=2) == [1, 2]


def test_diversity_filter_empty():
    with pytest.raises(LanguageModelError):
        diversity_filter([], _manual_vocab(), th_w=0.9, k_s=2)


def test_vocabulary_requires_unit_rows():
    with pytest.raises(LanguageModelError):
        Vocabulary(tokens=[BOS, EOS], token_emb=np.ones((2, 2)))


def test_diversity_filter_worked_example():
    """cos(a,b)=0.95 e cos(a,c)=0.5 com th_w=0.9: fica {a, c}"""
    a = [1.0, 0.0, 0.0, 0.0]
    b = [0.95, np.sqrt(1 - 0.95 ** 2), 0.0, 0.0]
    c = [0.5, 0.0, np.sqrt(0.75), 0.0]
    emb = np.array([[0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 0.0, 1.0], a, b, c])
    vocab = Vocabulary(tokens=[BOS, EOS, "a", "b", "c"], token_emb=emb)
    assert diversity_filter([2, 3, 4], vocab, th_w=0.9, k_s=10) == [2, 4]


def test_diversity_filter_keeps_order_and_spread():
    rng = np.random.default_rng(8)
    for _ in range(50):
        n, dim = int(rng.integers(5, 40)), int(rng.integers(2, 9))
        emb = rng.standard_normal((n + 2, dim))
        emb /= np.linalg.norm(emb, axis=1, keepdims=True)
        vocab = Vocabulary(tokens=[BOS, EOS] + [f"w{i}" for i in range(n)], token_emb=emb)
        order = list(rng.permutation(np.arange(2, n + 2)))
        th_w = float(rng.uniform(0.2, 1.0))
        k_s = int(rng.integers(1, n + 1))

        kept = diversity_filter(order, vocab, th_w=th_w, k_s=k_s)
        assert kept[0] == order[0]
        assert len(kept) <= k_s
        positions = [order.index(t) for t in kept]
        assert positions == sorted(positions)
        sims = emb[kept] @ emb[kept].T
        off_diag = sims[~np.eye(len(kept), dtype=bool)]
        assert np.all(off_diag < th_w)


def test_training_is_deterministic(toy_corpus):
    a = train_ngram(toy_corpus, n=2, k=0.1)
    b = train_ngram(toy_corpus, n=2, k=0.1)
    assert a.vocab.tokens == b.vocab.tokens
    assert np.array_equal(a.vocab.token_emb, b.vocab.token_emb)
    assert a.counts == b.counts
    ctx = [a.vocab.bos_id, a.vocab.ids["the"]]
    assert np.array_equal(a.log_probs(ctx), b.log_probs(ctx))
