# lm.py - Gerador de tokens candidatos: vocabulário, modelo n-grama e filtro de diversidade
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Protocol, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from .embed import HashEmbedder
from .exceptions import LanguageModelError, ModelFormatError
from .models import AttackConfig

BOS = "<s>"
EOS = "</s>"
TOKEN_DIM = 64
MAGIC = b"EINV-LM\0"
FORMAT_VERSION = 1


def tokenize_sentence(text: str) -> List[str]:
    """Tokens de palavra: minúsculas, separados por espaço (pontuação fica como está)"""
    return text.lower().split()


def load_corpus(path: Union[str, Path]) -> List[str]:
    """Uma sentença por linha, UTF-8; linhas vazias são ignoradas"""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip()]


@dataclass(eq=False)
class Vocabulary:
    """Tokens, máscaras ASCII/alfabética e a tabela de embeddings por token"""

    tokens: List[str]
    token_emb: np.ndarray
    ids: Dict[str, int] = field(init=False)
    bos_id: int = field(init=False)
    eos_id: int = field(init=False)
    is_ascii: np.ndarray = field(init=False)
    is_alphabetic: np.ndarray = field(init=False)

    def __post_init__(self):
        self.ids = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.ids) != len(self.tokens):
            raise LanguageModelError("vocabulary tokens must be unique")
        if BOS not in self.ids or EOS not in self.ids:
            raise LanguageModelError("vocabulary must contain BOS and EOS")
        self.bos_id = self.ids[BOS]
        self.eos_id = self.ids[EOS]

        self.is_ascii = np.array([tok.isascii() for tok in self.tokens], dtype=bool)
        self.is_alphabetic = np.array(
            [tok.isascii() and tok.isalpha() for tok in self.tokens], dtype=bool
        )

        self.token_emb = np.asarray(self.token_emb, dtype=np.float64)
        if self.token_emb.shape[0] != len(self.tokens):
            raise LanguageModelError("token_emb needs one row per token")
        norms = np.linalg.norm(self.token_emb, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-6):
            raise LanguageModelError("token_emb rows must be unit-norm")

    @classmethod
    def from_words(cls, words: Iterable[str], token_dim: int = TOKEN_DIM, seed: int = 0) -> "Vocabulary":
        """Vocabulário ordenado [BOS, EOS, palavras...] com embeddings por hashing"""
        tokens = [BOS, EOS] + sorted(set(words) - {BOS, EOS})
        emb = HashEmbedder(dim=token_dim, seed=seed).embed_batch(tokens)
        return cls(tokens=tokens, token_emb=emb)

    def __len__(self) -> int:
        return len(self.tokens)

    def detokenize(self, ids: Sequence[int]) -> str:
        return " ".join(self.tokens[i] for i in ids if i != self.bos_id and i != self.eos_id)


class TokenGenerator(Protocol):
    """Porta do gerador: qualquer backend com log-probabilidades sobre um Vocabulary"""

    vocab: Vocabulary

    def log_probs(self, context: Sequence[int]) -> np.ndarray: ...


@dataclass(eq=False)
class NGramLM:
    """Modelo n-grama com suavização add-k e backoff para contextos não vistos"""

    vocab: Vocabulary
    order: int
    k: float
    counts: Dict[Tuple[int, ...], Dict[int, int]]
    totals: Dict[Tuple[int, ...], int]
    _cache: Dict[Tuple[int, ...], np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    def _context_key(self, context: Sequence[int]) -> Tuple[int, ...]:
        if self.order == 1:
            return ()
        history = [self.vocab.bos_id] * (self.order - 2) + list(context)
        key = tuple(history[-(self.order - 1):])
        # backoff: encurta o contexto até achar um visto no treino
        while key and self.totals.get(key, 0) == 0:
            key = key[1:]
        return key

    def log_probs(self, context: Sequence[int]) -> np.ndarray:
        key = self._context_key(context)
        cached = self._cache.get(key)
        if cached is not None:
            return cached

        size = len(self.vocab)
        row = np.full(size, self.k, dtype=np.float64)
        for tok, c in self.counts.get(key, {}).items():
            row[tok] += c
        row /= self.totals.get(key, 0) + self.k * size
        out = np.log(row)
        out.setflags(write=False)
        self._cache[key] = out
        return out

    def probability(self, token: str, context: Sequence[str]) -> float:
        """P(token | contexto) com contexto em strings (sem BOS)"""
        ids = [self.vocab.bos_id] + [self.vocab.ids[w] for w in context]
        return float(np.exp(self.log_probs(ids)[self.vocab.ids[token]]))

    def save(self, path: Union[str, Path]) -> None:
        payload = {
            "order": self.order,
            "k": self.k,
            "tokens": self.vocab.tokens,
            "token_emb": self.vocab.token_emb.tolist(),
            "counts": [
                [list(ctx), sorted(nxt.items())] for ctx, nxt in sorted(self.counts.items())
            ],
        }
        data = MAGIC + bytes([FORMAT_VERSION]) + json.dumps(payload).encode("utf-8")
        Path(path).write_bytes(data)
        logger.info(f"Modelo n-grama salvo em {path} ({len(self.vocab)} tokens)")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "NGramLM":
        data = Path(path).read_bytes()
        if not data.startswith(MAGIC):
            raise ModelFormatError(f"{path}: missing EINV-LM header")
        version = data[len(MAGIC)] if len(data) > len(MAGIC) else None
        if version != FORMAT_VERSION:
            raise ModelFormatError(f"{path}: unsupported format version {version}")

        payload = json.loads(data[len(MAGIC) + 1:].decode("utf-8"))
        vocab = Vocabulary(tokens=payload["tokens"], token_emb=np.array(payload["token_emb"]))
        counts = {tuple(ctx): {int(t): int(c) for t, c in nxt} for ctx, nxt in payload["counts"]}
        totals = {ctx: sum(nxt.values()) for ctx, nxt in counts.items()}
        logger.debug(f"Modelo n-grama carregado de {path}")
        return cls(vocab=vocab, order=int(payload["order"]), k=float(payload["k"]), counts=counts, totals=totals)


def train_ngram(
    corpus: List[str], n: int, k: float, token_dim: int = TOKEN_DIM, seed: int = 0
) -> NGramLM:
    """Conta n-gramas (e todos os contextos mais curtos) sobre o corpus"""
    if n < 1:
        raise LanguageModelError("n must be at least 1")
    if not k > 0:
        raise LanguageModelError("smoothing k must be positive")

    sentences = [tokenize_sentence(s) for s in corpus]
    sentences = [s for s in sentences if s]
    if not sentences:
        raise LanguageModelError("corpus is empty")

    vocab = Vocabulary.from_words((w for s in sentences for w in s), token_dim=token_dim, seed=seed)
    counts: Dict[Tuple[int, ...], Dict[int, int]] = defaultdict(lambda: defaultdict(int))

    for words in sentences:
        seq = [vocab.bos_id] * (n - 1) + [vocab.ids[w] for w in words] + [vocab.eos_id]
        for i in range(n - 1, len(seq)):
            for length in range(n):
                counts[tuple(seq[i - length:i])][seq[i]] += 1

    frozen = {ctx: dict(nxt) for ctx, nxt in counts.items()}
    totals = {ctx: sum(nxt.values()) for ctx, nxt in frozen.items()}
    logger.info(f"N-grama treinado: ordem={n}, {len(sentences)} sentenças, {len(vocab)} tokens")
    return NGramLM(vocab=vocab, order=n, k=k, counts=frozen, totals=totals)


def next_token_logits(
    lm: TokenGenerator, context: Sequence[int], iteration: int, cfg: AttackConfig
) -> np.ndarray:
    """Logits do próximo token com as restrições de vocabulário aplicadas"""
    vocab = lm.vocab
    if not context or context[0] != vocab.bos_id:
        raise LanguageModelError("context must begin with BOS")

    logits = np.array(lm.log_probs(context), dtype=np.float64)
    logits[~vocab.is_ascii] = -np.inf
    logits[vocab.bos_id] = -np.inf
    if iteration == 1:
        penalized = ~vocab.is_alphabetic & np.isfinite(logits)
        logits[penalized] += cfg.first_step_penalty
    return logits


def diversity_filter(
    candidate_ids: Sequence[int], vocab: Vocabulary, th_w: float, k_s: int
) -> List[int]:
    """Seleção gulosa em ordem de logit: mantém o token se cos < th_w com todos os já mantidos"""
    if len(candidate_ids) == 0:
        raise LanguageModelError("diversity_filter needs at least one candidate")

    kept = [int(candidate_ids[0])]
    kept_emb = np.empty((min(k_s, len(candidate_ids)), vocab.token_emb.shape[1]))
    kept_emb[0] = vocab.token_emb[kept[0]]
    for tok in candidate_ids[1:]:
        if len(kept) >= k_s:
            break
        emb = vocab.token_emb[tok]
        if float(np.max(kept_emb[: len(kept)] @ emb)) < th_w:
            kept_emb[len(kept)] = emb
            kept.append(int(tok))
    return kept
