# embed.py - Embedders locais, vítimas sintéticas e o handle que contabiliza consultas
import hashlib
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Protocol, Sequence, runtime_checkable

import numpy as np
from loguru import logger

from .defense import DefenseKind, DefenseSpec, apply_defense
from .exceptions import EmbeddingError
from .models import Phase, QueryLedger, count_tokens
from .vectors import l2_normalize


@runtime_checkable
class EmbedderPort(Protocol):
    """Qualquer embedder: local, vítima sintética ou cliente HTTP"""

    @property
    def dim(self) -> int: ...

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray: ...


@lru_cache(maxsize=1 << 18)
def _signed_bucket(gram: str, dim: int, seed: int) -> tuple:
    # BLAKE2b com chave = seed: estável entre processos, ao contrário de hash()
    digest = hashlib.blake2b(
        gram.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little")
    ).digest()
    h = int.from_bytes(digest, "little")
    return (h >> 1) % dim, (1.0 if h & 1 else -1.0)


@lru_cache(maxsize=1 << 16)
def _hash_vector(text: str, dim: int, ngram: int, seed: int) -> np.ndarray:
    t = text.lower()
    if len(t) >= ngram:
        grams = [t[i:i + ngram] for i in range(len(t) - ngram + 1)]
    else:
        grams = [t] if t else []

    vec = np.zeros(dim, dtype=np.float64)
    for g in grams:
        idx, sign = _signed_bucket(g, dim, seed)
        vec[idx] += sign

    norm = np.linalg.norm(vec)
    if norm == 0.0:
        # texto vazio (ou cancelamento total): primeiro vetor da base
        vec[0] = 1.0
    else:
        vec /= norm
    vec.setflags(write=False)
    return vec


@dataclass(frozen=True)
class HashEmbedder:
    """Embedder determinístico por feature hashing de n-gramas de caracteres"""

    dim: int = 256
    ngram: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise EmbeddingError("dim must be positive")
        if self.ngram < 1:
            raise EmbeddingError("ngram must be positive")
        if self.seed < 0:
            raise EmbeddingError("seed must be non-negative")

    def embed(self, text: str) -> np.ndarray:
        return _hash_vector(text, self.dim, self.ngram, self.seed).copy()

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        if len(texts) == 0:
            return np.zeros((0, self.dim))
        return np.stack([_hash_vector(t, self.dim, self.ngram, self.seed) for t in texts])


def hash_embed(e: HashEmbedder, text: str) -> np.ndarray:
    """Embedding unitário de `text` (vazio → primeiro vetor da base)"""
    return e.embed(text)


@dataclass
class LinearVictim:
    """Vítima cujo espaço é uma transformação linear exata de um embedder base"""

    base: EmbedderPort
    d_victim: int = 192
    seed: int = 7
    normalize: bool = False
    map_matrix: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        if self.map_matrix is None:
            if self.d_victim > self.base.dim:
                raise EmbeddingError("d_victim cannot exceed the base dimension (full column rank)")
            rng = np.random.default_rng(self.seed)
            a = rng.standard_normal((self.base.dim, self.d_victim)) / np.sqrt(self.base.dim)
            if np.linalg.matrix_rank(a) < self.d_victim:
                raise EmbeddingError("generated map matrix is rank deficient")
            self.map_matrix = a
        else:
            self.map_matrix = np.asarray(self.map_matrix, dtype=np.float64)
            if self.map_matrix.shape[0] != self.base.dim:
                raise EmbeddingError("map_matrix rows must match the base dimension")
            self.d_victim = self.map_matrix.shape[1]

    @property
    def dim(self) -> int:
        return self.d_victim

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        out = np.asarray(self.base.embed_batch(texts)) @ self.map_matrix
        return l2_normalize(out) if self.normalize else out


class VictimHandle:
    """Acesso à vítima: aplica a defesa e registra cada chamada no ledger"""

    def __init__(
        self,
        inner: EmbedderPort,
        ledger: Optional[QueryLedger] = None,
        defense: Optional[DefenseSpec] = None,
        phase: Phase = Phase.ONLINE,
        rng: Optional[np.random.Generator] = None,
        _lock: Optional[threading.Lock] = None,
    ):
        self.inner = inner
        self.ledger = ledger if ledger is not None else QueryLedger()
        self.defense = defense
        self.phase = Phase(phase)
        if rng is None:
            rng = np.random.default_rng(defense.seed if defense is not None else 0)
        self._rng = rng
        self._lock = _lock or threading.Lock()

    @property
    def dim(self) -> int:
        return self.inner.dim

    @property
    def deterministic(self) -> bool:
        """Repetir uma consulta devolve o mesmo vetor (sem ruído fresco)"""
        return self.defense is None or self.defense.kind == DefenseKind.NONE

    def with_phase(self, phase: Phase) -> "VictimHandle":
        """Mesmo ledger, defesa e RNG; só muda a fase contabilizada"""
        return VictimHandle(self.inner, self.ledger, self.defense, phase, self._rng, self._lock)

    def without_defense(self, phase: Phase = Phase.EVAL) -> "VictimHandle":
        return VictimHandle(self.inner, self.ledger, None, phase, self._rng, self._lock)

    def query(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        if not texts:
            raise EmbeddingError("victim query needs at least one text")

        # falhas do backend propagam antes de qualquer contagem
        out = np.array(self.inner.embed_batch(texts), dtype=np.float64)
        if out.ndim != 2 or out.shape[0] != len(texts):
            raise EmbeddingError(f"victim returned {out.shape[0]} embeddings for {len(texts)} texts")

        with self._lock:
            if not self.deterministic:
                out = np.stack([apply_defense(self.defense, row, self._rng) for row in out])
            self.ledger.record(self.phase, len(texts), sum(count_tokens(t) for t in texts))

        logger.debug(f"Vítima consultada ({self.phase.value}): {len(texts)} textos")
        return out

    # permite usar o handle onde se espera um EmbedderPort
    embed_batch = query


def victim_query(h: VictimHandle, texts: List[str]) -> np.ndarray:
    """Consulta a vítima pelo handle (defesa + ledger)"""
    return h.query(texts)
