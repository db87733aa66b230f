import itertools

import numpy as np
import pytest

from embinv.embed import HashEmbedder, LinearVictim
from embinv.lm import train_ngram
from embinv.models import AttackConfig

SUBJECTS = ["the cat", "a dog", "the bird", "my friend", "the teacher", "a child", "the farmer", "our neighbor"]
VERBS = ["sees", "likes", "finds", "carries", "paints", "follows", "watches", "cleans"]
OBJECTS = ["the red ball", "a small box", "the old car", "a green apple", "the wooden chair", "a blue kite"]
PLACES = ["in the park", "near the river", "at home", "on the hill", "by the road", "in the garden"]


def make_toy_corpus(n: int = 500, seed: int = 0):
    """Sentenças sintéticas sujeito-verbo-objeto-lugar, embaralhadas com seed"""
    combos = [" ".join(parts) for parts in itertools.product(SUBJECTS, VERBS, OBJECTS, PLACES)]
    order = np.random.default_rng(seed).permutation(len(combos))
    return [combos[i] for i in order[:n]]


@pytest.fixture(scope="session")
def toy_corpus():
    return make_toy_corpus()


@pytest.fixture(scope="session")
def bigram(toy_corpus):
    return train_ngram(toy_corpus, n=2, k=0.1)


@pytest.fixture(scope="session")
def local_embedder():
    return HashEmbedder(dim=256, seed=11)


@pytest.fixture(scope="session")
def linear_victim():
    """Vítima linear sobre um embedder de hashing independente do local"""
    return LinearVictim(base=HashEmbedder(dim=256, seed=23), d_victim=192, seed=5)


@pytest.fixture
def toy_config():
    return AttackConfig(k_s=64, k_a=20, k_b=5, t_max=12, final_rerank=3)


@pytest.fixture
def toy_files(tmp_path, toy_corpus):
    """dataset.txt e corpus.txt no diretório temporário"""
    dataset = tmp_path / "dataset.txt"
    corpus = tmp_path / "corpus.txt"
    dataset.write_text("\n".join(toy_corpus[:60]) + "\n", encoding="utf-8")
    corpus.write_text("\n".join(toy_corpus) + "\n", encoding="utf-8")
    return dataset, corpus

