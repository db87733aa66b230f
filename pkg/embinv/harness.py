"""
Orquestração de experimentos: dataset → alvos → ataque → métricas → relatórios.

Saídas por experimento:
    report.jsonl  um RunReport por alvo
    summary.csv   médias por alvo com o cabeçalho fixo CSV_HEADER
"""
import csv
import itertools
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from .align import project
from .client import RemoteEmbedder
from .defense import DefenseSpec
from .embed import EmbedderPort, HashEmbedder, LinearVictim, VictimHandle
from .exceptions import ExperimentError
from .lm import NGramLM, TokenGenerator, load_corpus, train_ngram
from .metrics import evaluate_text
from .models import AttackConfig, Phase, QueryLedger, RunReport, validate_config
from .search import attack
from .settings import EmbinvSettings, get_settings
from .vectors import cosine

CSV_HEADER = [
    "victim", "defense", "eps_per_dim",
    "BLEU-1", "BLEU-2", "ROUGE-L", "ROUGE-1", "COS",
    "online_sentences", "online_tokens",
]
METRIC_COLUMNS = ["BLEU-1", "BLEU-2", "ROUGE-L", "ROUGE-1", "COS"]


class VictimKind(str, Enum):
    HASH = "hash"
    LINEAR = "linear"
    REMOTE = "remote"


class VictimSpec(BaseModel):
    """Qual vítima atacar"""

    model_config = ConfigDict(extra="forbid")

    kind: VictimKind = VictimKind.LINEAR
    dim: int = Field(default=256, description="Dimensão do embedder base")
    ngram: int = 3
    seed: int = 1001
    d_victim: int = 192
    normalize: bool = False
    base_url: Optional[str] = None


class LocalEmbedderSpec(BaseModel):
    """Embedder local do atacante"""

    model_config = ConfigDict(extra="forbid")

    dim: int = 256
    ngram: int = 3
    seed: int = 1


class ExperimentSpec(BaseModel):
    """Protocolo completo de um experimento"""

    model_config = ConfigDict(extra="forbid")

    dataset: Optional[Path] = None
    corpus: Optional[Path] = None
    lm_path: Optional[Path] = None
    ngram_order: int = Field(default=2, ge=1)
    smoothing_k: float = Field(default=0.1, gt=0)
    attack: AttackConfig = Field(default_factory=AttackConfig)
    victim: VictimSpec = Field(default_factory=VictimSpec)
    defense: DefenseSpec = Field(default_factory=DefenseSpec)
    local: LocalEmbedderSpec = Field(default_factory=LocalEmbedderSpec)
    samples: int = Field(default=200, ge=0)
    output_dir: Path = Path("runs")
    report_name: str = "report.jsonl"
    summary_name: str = "summary.csv"
    seed: int = 0
    workers: int = Field(default=1, ge=1)

    @classmethod
    def from_file(cls, path: Path, overrides: Optional[Dict[str, Any]] = None) -> "ExperimentSpec":
        """Lê o JSON de configuração e aplica overrides (caminhos com ponto)"""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        for dotted, value in (overrides or {}).items():
            set_dotted(data, dotted, value)
        return cls.model_validate(data)


class ExperimentSummary(BaseModel):
    """Linha do summary.csv + totais do ledger"""

    victim: str
    defense: str
    eps_per_dim: Optional[float] = None
    n_targets: int = 0
    n_failed: int = 0
    means: Dict[str, float] = Field(default_factory=dict)
    mean_online_sentences: float = 0.0
    mean_online_tokens: float = 0.0
    total: QueryLedger = Field(default_factory=QueryLedger)

    @property
    def n_ok(self) -> int:
        return self.n_targets - self.n_failed

    def csv_row(self) -> List[str]:
        eps = "-" if self.eps_per_dim is None else f"{self.eps_per_dim:.4f}"
        cells = [self.victim, self.defense, eps]
        cells += [f"{self.means.get(name, 0.0):.4f}" for name in METRIC_COLUMNS]
        cells += [f"{self.mean_online_sentences:.4f}", f"{self.mean_online_tokens:.4f}"]
        return cells


class ExperimentResult(BaseModel):
    reports: List[RunReport]
    summary: ExperimentSummary


def set_dotted(data: Dict[str, Any], dotted: str, value: Any) -> None:
    """data['a']['b'] = value para 'a.b', criando níveis que faltam"""
    keys = dotted.split(".")
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
    node[keys[-1]] = value


def check_ready(spec: ExperimentSpec) -> List[str]:
    """Valida arquivos e tamanho da amostra no início do experimento; devolve o dataset"""
    validate_config(spec.attack)
    if spec.dataset is None or not spec.dataset.exists():
        raise ExperimentError(f"dataset not found: {spec.dataset}")
    if spec.lm_path is not None:
        if not spec.lm_path.exists():
            raise ExperimentError(f"language model not found: {spec.lm_path}")
    elif spec.corpus is None or not spec.corpus.exists():
        raise ExperimentError(f"generator corpus not found: {spec.corpus}")

    lines = load_corpus(spec.dataset)
    if spec.samples > len(lines):
        raise ExperimentError(f"samples={spec.samples} exceeds dataset size {len(lines)}")
    return lines


def sample_texts(lines: Sequence[str], n: int, seed: int) -> List[str]:
    """Primeiros n após embaralhamento com seed"""
    order = np.random.default_rng(seed).permutation(len(lines))
    return [lines[i] for i in order[:n]]


def build_generator(spec: ExperimentSpec) -> TokenGenerator:
    if spec.lm_path is not None:
        return NGramLM.load(spec.lm_path)
    return train_ngram(load_corpus(spec.corpus), n=spec.ngram_order, k=spec.smoothing_k)


def build_local(spec: LocalEmbedderSpec) -> HashEmbedder:
    return HashEmbedder(dim=spec.dim, ngram=spec.ngram, seed=spec.seed)


def build_victim(spec: VictimSpec, settings: Optional[EmbinvSettings] = None) -> EmbedderPort:
    """Instancia a vítima descrita em `spec`"""
    if spec.kind == VictimKind.HASH:
        return HashEmbedder(dim=spec.dim, ngram=spec.ngram, seed=spec.seed)
    if spec.kind == VictimKind.LINEAR:
        base = HashEmbedder(dim=spec.dim, ngram=spec.ngram, seed=spec.seed)
        return LinearVictim(base=base, d_victim=spec.d_victim, seed=spec.seed, normalize=spec.normalize)

    settings = settings or get_settings(require_api_key=True)
    if spec.base_url:
        settings = settings.model_copy(update={"base_url": spec.base_url})
    return RemoteEmbedder(config=settings)


def attack_text(
    index: int,
    text: str,
    spec: ExperimentSpec,
    lm: TokenGenerator,
    local: HashEmbedder,
    inner: EmbedderPort,
) -> RunReport:
    """Provisiona o alvo, ataca e avalia um único texto"""
    ledger = QueryLedger()
    rng = np.random.default_rng([spec.defense.seed, index])
    setup = VictimHandle(inner, ledger, spec.defense, Phase.SETUP, rng=rng)
    target_id = str(index)

    try:
        target = setup.query([text])[0]
        outcome = attack(target, lm, local, setup.with_phase(Phase.ONLINE), spec.attack, target_id)

        # COS medido no espaço limpo da vítima
        evaluator = setup.without_defense(Phase.EVAL)
        clean = evaluator.query([text])[0]
        metrics = evaluate_text(outcome.report.reconstruction, text, clean, evaluator)

        align_cos = None
        if outcome.state.align.w is not None:
            align_cos = cosine(project(outcome.state.align, local.embed_batch([text])[0]), target)

        return outcome.report.model_copy(
            update={
                "reference": text,
                "metrics": metrics,
                "ledger": ledger.snapshot(),
                "alignment_cos": align_cos,
            }
        )
    except Exception as e:
        logger.exception(f"Falha no alvo {target_id}")
        return RunReport(target_id=target_id, reference=text, ledger=ledger.snapshot(), error=str(e))


def summarize(reports: Sequence[RunReport], spec: ExperimentSpec) -> ExperimentSummary:
    ok = [r for r in reports if r.ok]
    total = QueryLedger()
    for r in reports:
        total = total + r.ledger

    means = {name: float(np.mean([r.metrics[name] for r in ok])) if ok else 0.0 for name in METRIC_COLUMNS}
    n = max(len(ok), 1)
    return ExperimentSummary(
        victim=spec.victim.kind.value,
        defense=spec.defense.kind.value,
        eps_per_dim=spec.defense.eps_per_dim,
        n_targets=len(reports),
        n_failed=len(reports) - len(ok),
        means=means,
        mean_online_sentences=sum(r.ledger.online_sentences for r in ok) / n,
        mean_online_tokens=sum(r.ledger.online_tokens for r in ok) / n,
        total=total,
    )


def write_reports(path: Path, reports: Sequence[RunReport]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in reports:
            f.write(r.model_dump_json() + "\n")


def write_summary(path: Path, summaries: Sequence[ExperimentSummary], settings: Optional[List[str]] = None) -> None:
    """Cabeçalho fixo; uma linha por resumo com alvos bem-sucedidos"""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow((["setting"] if settings is not None else []) + CSV_HEADER)
        for i, summary in enumerate(summaries):
            if summary.n_ok == 0:
                continue
            prefix = [settings[i]] if settings is not None else []
            writer.writerow(prefix + summary.csv_row())


def run_experiment(spec: ExperimentSpec, settings: Optional[EmbinvSettings] = None) -> ExperimentResult:
    """Ataca cada texto amostrado e grava report.jsonl + summary.csv"""
    lines = check_ready(spec)
    texts = sample_texts(lines, spec.samples, spec.seed)
    logger.info(f"Experimento: {len(texts)} alvos, vítima={spec.victim.kind.value}, defesa={spec.defense.kind.value}")

    lm = build_generator(spec)
    local = build_local(spec.local)
    inner = build_victim(spec.victim, settings)
    per_thread = threading.local()

    def victim_for_thread() -> EmbedderPort:
        # requests.Session não é thread-safe: um RemoteEmbedder por worker
        if spec.workers == 1 or spec.victim.kind != VictimKind.REMOTE:
            return inner
        if not hasattr(per_thread, "victim"):
            per_thread.victim = build_victim(spec.victim, settings)
        return per_thread.victim

    def run_one(item: Tuple[int, str]) -> RunReport:
        return attack_text(item[0], item[1], spec, lm, local, victim_for_thread())

    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            reports = list(pool.map(run_one, enumerate(texts)))
    else:
        reports = [run_one(item) for item in enumerate(texts)]

    summary = summarize(reports, spec)
    if summary.n_failed:
        logger.warning(f"{summary.n_failed} alvos falharam e ficaram fora das médias")

    spec.output_dir.mkdir(parents=True, exist_ok=True)
    write_reports(spec.output_dir / spec.report_name, reports)
    write_summary(spec.output_dir / spec.summary_name, [summary])
    logger.success(f"✓ Relatórios gravados em {spec.output_dir}")
    return ExperimentResult(reports=reports, summary=summary)


def run_single(text: str, spec: ExperimentSpec, settings: Optional[EmbinvSettings] = None) -> RunReport:
    """Ataque a um único texto, sem arquivos de saída"""
    validate_config(spec.attack)
    if spec.lm_path is None and (spec.corpus is None or not spec.corpus.exists()):
        raise ExperimentError(f"generator corpus not found: {spec.corpus}")
    lm = build_generator(spec)
    return attack_text(0, text, spec, lm, build_local(spec.local), build_victim(spec.victim, settings))


def parse_grid(items: Sequence[str]) -> Dict[str, List[Any]]:
    """'attack.k_a=10,25,50' → {'attack.k_a': [10, 25, 50]}"""
    grid: Dict[str, List[Any]] = {}
    for item in items:
        if "=" not in item:
            raise ExperimentError(f"grid entry must look like path=v1,v2: {item}")
        path, raw = item.split("=", 1)
        values = []
        for token in raw.split(","):
            try:
                values.append(json.loads(token))
            except json.JSONDecodeError:
                values.append(token)
        grid[path.strip()] = values
    return grid


def run_sweep(
    spec: ExperimentSpec, grid: Dict[str, List[Any]], settings: Optional[EmbinvSettings] = None
) -> List[Tuple[str, ExperimentSummary]]:
    """Um experimento por combinação da grade; grava sweep.csv no output_dir base"""
    paths = list(grid)
    results: List[Tuple[str, ExperimentSummary]] = []

    for values in itertools.product(*(grid[p] for p in paths)):
        data = spec.model_dump(mode="json", by_alias=True)
        for path, value in zip(paths, values):
            set_dotted(data, path, value)
        label = ";".join(f"{p}={v}" for p, v in zip(paths, values))
        slug = "_".join(f"{p.split('.')[-1]}-{v}" for p, v in zip(paths, values)) or "base"
        data["output_dir"] = str(spec.output_dir / slug)

        logger.info(f"Sweep: {label}")
        result = run_experiment(ExperimentSpec.model_validate(data), settings)
        results.append((label, result.summary))

    spec.output_dir.mkdir(parents=True, exist_ok=True)
    write_summary(spec.output_dir / "sweep.csv", [s for _, s in results], settings=[lbl for lbl, _ in results])
    return results
