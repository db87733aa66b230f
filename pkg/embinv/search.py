# search.py - Loop recursivo do ataque: expansão, consulta, realinhamento, re-pontuação e beam
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from .align import AlignState, confidence, ingest, project, solve
from .embed import EmbedderPort, VictimHandle
from .exceptions import SearchError
from .lm import TokenGenerator, diversity_filter, next_token_logits
from .models import AttackConfig, QueryLedger, QuerySelection, Rounding, RunReport, validate_config
from .vectors import as_embedding, cosine, cosine_to


@dataclass(frozen=True, eq=False)
class Candidate:
    """Reconstrução parcial (prefixo sem BOS)"""

    tokens: Tuple[int, ...]
    text: str
    last_logit: float
    local_emb: np.ndarray
    projected_emb: Optional[np.ndarray] = None
    victim_emb: Optional[np.ndarray] = None
    score: Optional[float] = None
    finished: bool = False

    def target_cosine(self, target: np.ndarray) -> float:
        """Cosseno com o alvo: embedding real da vítima se consultado, senão a projeção"""
        emb = self.victim_emb if self.victim_emb is not None else self.projected_emb
        return 0.0 if emb is None else cosine(emb, target)


@dataclass(eq=False)
class BeamState:
    iteration: int
    live: List[Candidate]
    finished: List[Candidate]
    align: AlignState
    ledger: QueryLedger
    memo: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def initial(
        cls, local_embedder: EmbedderPort, d_victim: int, cfg: AttackConfig, ledger: QueryLedger
    ) -> "BeamState":
        root = Candidate(
            tokens=(),
            text="",
            last_logit=0.0,
            local_emb=np.asarray(local_embedder.embed_batch([""]))[0],
        )
        align = AlignState(d_local=local_embedder.dim, d_victim=d_victim, lam=cfg.lambda_)
        return cls(iteration=0, live=[root], finished=[], align=align, ledger=ledger)


@dataclass(eq=False)
class AttackOutcome:
    report: RunReport
    state: BeamState


def z_score(values: Sequence[float]) -> np.ndarray:
    """(x − média)/desvio populacional; variância nula → zeros"""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ValueError("z_score needs at least one value")
    std = x.std()
    if x.size == 1 or std < 1e-12:
        return np.zeros_like(x)
    return (x - x.mean()) / std


def score_candidates(logits: Sequence[float], cosines: Sequence[float], conf: float) -> np.ndarray:
    """S = Z(logits) + conf × Z(cos)"""
    logits = np.asarray(logits, dtype=np.float64)
    cosines = np.asarray(cosines, dtype=np.float64)
    if logits.shape != cosines.shape:
        raise ValueError(f"length mismatch: {logits.shape[0]} logits vs {cosines.shape[0]} cosines")
    return z_score(logits) + conf * z_score(cosines)


def query_count(t: int, cfg: AttackConfig, available: Optional[int] = None) -> int:
    """Consultas da iteração t: 3·K_A em t=1, depois K_A·γ^{t−1} arredondado (mínimo 1)"""
    if t < 1:
        raise ValueError("iteration must be at least 1")
    if t == 1:
        q = 3 * cfg.k_a
    else:
        raw = cfg.k_a * cfg.gamma ** (t - 1)
        if cfg.rounding == Rounding.FLOOR:
            q = math.floor(raw)
        elif cfg.rounding == Rounding.CEIL:
            q = math.ceil(raw)
        else:
            q = math.floor(raw + 0.5)
        q = max(1, q)
    if available is not None:
        q = min(q, available)
    return int(q)


def selection_keys(
    logits: np.ndarray, cosines: np.ndarray, conf: float, policy: QuerySelection
) -> np.ndarray:
    """Chave de ordenação para escolher quem vai para a vítima"""
    if policy == QuerySelection.COSINE:
        return conf * z_score(cosines)
    return score_candidates(logits, cosines, conf)


def _target_cosines(
    projected: Optional[np.ndarray], known: List[Optional[np.ndarray]], target: np.ndarray
) -> np.ndarray:
    rows = np.zeros((len(known), target.size)) if projected is None else np.array(projected)
    for i, emb in enumerate(known):
        if emb is not None:
            rows[i] = emb
    return cosine_to(rows, target)


def beam_step(
    state: BeamState,
    target: np.ndarray,
    lm: TokenGenerator,
    local_embedder: EmbedderPort,
    victim: VictimHandle,
    cfg: AttackConfig,
) -> BeamState:
    """Uma iteração completa (passos ① a ⑨)"""
    if not state.live:
        raise SearchError("beam has no live candidates")

    t = state.iteration + 1
    vocab = lm.vocab
    target = as_embedding(target)
    use_memo = cfg.memoize and victim.deterministic

    # ① expansão com filtro de diversidade
    parents: List[Candidate] = []
    new_tokens: List[int] = []
    step_logits: List[float] = []
    for cand in state.live:
        logits = next_token_logits(lm, (vocab.bos_id,) + cand.tokens, t, cfg)
        order = np.argsort(-logits, kind="stable")
        order = order[np.isfinite(logits[order])]
        if not cand.tokens:
            # prefixo vazio: EOS daria uma reconstrução vazia
            order = order[order != vocab.eos_id]
        if order.size == 0:
            continue
        for tok in diversity_filter(order, vocab, cfg.th_w, cfg.k_s):
            parents.append(cand)
            new_tokens.append(tok)
            step_logits.append(float(logits[tok]))

    if not parents:
        logger.warning(f"Iteração {t}: nenhuma expansão possível, encerrando o beam")
        closed = [
            Candidate(c.tokens, c.text, c.last_logit, c.local_emb, c.projected_emb,
                      c.victim_emb, c.score, True)
            for c in state.live
        ]
        return BeamState(state.iteration, [], state.finished + closed, state.align, state.ledger, state.memo)

    tokens = [p.tokens + (tok,) for p, tok in zip(parents, new_tokens)]
    texts = [vocab.detokenize(seq) for seq in tokens]
    logits_arr = np.array(step_logits)
    locals_ = np.asarray(local_embedder.embed_batch(texts), dtype=np.float64)
    known: List[Optional[np.ndarray]] = [state.memo.get(x) if use_memo else None for x in texts]

    conf_prev = state.align.conf_history[-1] if state.align.conf_history else 0.0
    weight = cfg.conf_override if cfg.conf_override is not None else conf_prev

    # ②–④ projeção com o W anterior e agrupamento; em t=1 só os logits
    if state.align.w is not None:
        stale_cos = _target_cosines(project(state.align, locals_), known, target)
        keys = selection_keys(logits_arr, stale_cos, weight, cfg.query_selection)
    else:
        keys = logits_arr
    ranking = np.argsort(-keys, kind="stable")

    pending: List[int] = []
    seen = set()
    for i in ranking:
        if known[i] is None and texts[i] not in seen:
            seen.add(texts[i])
            pending.append(int(i))
    query_idx = pending[:query_count(t, cfg, available=len(pending))]

    # ⑤–⑥ consulta à vítima e atualização online de W
    if query_idx:
        q_texts = [texts[i] for i in query_idx]
        answers = victim.query(q_texts)
        w_prev = state.align.w
        ingest(state.align, locals_[query_idx], answers)
        solve(state.align)
        conf_t = confidence(state.align, locals_[query_idx], answers, w_prev, t)

        fresh = dict(zip(q_texts, answers))
        if use_memo:
            state.memo.update(fresh)
        known = [fresh.get(x, k) for x, k in zip(texts, known)]
    else:
        conf_t = conf_prev
        state.align.conf_history.append(conf_t)

    weight = cfg.conf_override if cfg.conf_override is not None else conf_t

    # ⑦ re-projeção com o W atualizado (consultados usam o embedding real)
    projected = project(state.align, locals_) if state.align.w is not None else None
    cosines = _target_cosines(projected, known, target)

    # ⑧ re-pontua tudo; ⑨ mantém o top-K_B
    scores = score_candidates(logits_arr, cosines, weight)
    live: List[Candidate] = []
    finished = list(state.finished)
    for i in np.argsort(-scores, kind="stable")[: cfg.k_b]:
        done = new_tokens[i] == vocab.eos_id or len(tokens[i]) >= cfg.t_max
        cand = Candidate(
            tokens=tokens[i],
            text=texts[i],
            last_logit=float(logits_arr[i]),
            local_emb=locals_[i],
            projected_emb=None if projected is None else projected[i],
            victim_emb=known[i],
            score=float(scores[i]),
            finished=done,
        )
        (finished if done else live).append(cand)

    logger.info(
        f"Iteração {t}: {len(texts)} expansões, {len(query_idx)} consultas, "
        f"conf={conf_t:.4f}, {len(live)} vivos, {len(finished)} finalizados"
    )
    return BeamState(t, live, finished, state.align, state.ledger, state.memo)


def attack(
    target: np.ndarray,
    lm: TokenGenerator,
    local_embedder: EmbedderPort,
    victim: VictimHandle,
    cfg: AttackConfig,
    target_id: str = "0",
) -> AttackOutcome:
    """Executa o ataque completo e devolve relatório + estado final do beam"""
    validate_config(cfg)
    target = as_embedding(target)
    state = BeamState.initial(local_embedder, target.size, cfg, victim.ledger)

    while state.live and state.iteration < cfg.t_max:
        state = beam_step(state, target, lm, local_embedder, victim, cfg)

    pool = state.finished or state.live
    if not pool:
        raise SearchError("search produced no candidates")

    # finalistas: maior cosseno estimado, depois verificação real na vítima
    estimated = [c.target_cosine(target) for c in pool]
    ranked = sorted(range(len(pool)), key=lambda i: -estimated[i])
    chosen: List[int] = []
    seen = set()
    for i in ranked:
        if len(chosen) >= cfg.final_rerank:
            break
        if pool[i].text not in seen:
            seen.add(pool[i].text)
            chosen.append(i)

    final_cos = None
    if chosen:
        answers = victim.query([pool[i].text for i in chosen])
        true_cos = cosine_to(answers, target)
        best = chosen[int(np.argmax(true_cos))]
        final_cos = float(np.max(true_cos))
    else:
        best = ranked[0]

    alignment = None
    if cfg.dump_alignment and state.align.w is not None:
        alignment = {"w": state.align.w.tolist(), "conf_history": list(state.align.conf_history)}

    report = RunReport(
        target_id=target_id,
        reconstruction=pool[best].text,
        ledger=victim.ledger.snapshot(),
        conf_trace=list(state.align.conf_history),
        iterations_used=state.iteration,
        final_cos=final_cos,
        alignment=alignment,
        seed=cfg.seed,
    )
    logger.success(f"✓ Alvo {target_id}: '{report.reconstruction}' em {state.iteration} iterações")
    return AttackOutcome(report=report, state=state)


def run_attack(
    target: np.ndarray,
    lm: TokenGenerator,
    local_embedder: EmbedderPort,
    victim: VictimHandle,
    cfg: AttackConfig,
    target_id: str = "0",
) -> RunReport:
    """argmin do cosseno-distância sobre os candidatos gerados"""
    return attack(target, lm, local_embedder, victim, cfg, target_id).report
