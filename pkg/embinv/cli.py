# cli.py - Linha de comando: attack, serve, eval, train-lm, sweep
import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from loguru import logger
from pydantic import ValidationError

from .defense import DefenseKind
from .embed import VictimHandle
from .exceptions import EmbinvError
from .harness import (
    ExperimentSpec,
    VictimKind,
    build_victim,
    parse_grid,
    run_experiment,
    run_single,
    run_sweep,
    set_dotted,
)
from .lm import load_corpus, train_ngram
from .metrics import text_metrics
from .models import Phase
from .service import serve_embed
from .settings import get_settings
from .vectors import cosine

# flag → caminho com ponto no ExperimentSpec
SPEC_FLAGS = {
    "dataset": "dataset",
    "corpus": "corpus",
    "lm": "lm_path",
    "ngram_order": "ngram_order",
    "samples": "samples",
    "output_dir": "output_dir",
    "seed": "seed",
    "workers": "workers",
    "k_s": "attack.k_s",
    "k_a": "attack.k_a",
    "k_b": "attack.k_b",
    "gamma": "attack.gamma",
    "th_w": "attack.th_w",
    "t_max": "attack.t_max",
    "lambda_": "attack.lambda",
    "final_rerank": "attack.final_rerank",
    "conf_override": "attack.conf_override",
    "query_selection": "attack.query_selection",
    "rounding": "attack.rounding",
    "dump_alignment": "attack.dump_alignment",
    "victim": "victim.kind",
    "victim_dim": "victim.dim",
    "d_victim": "victim.d_victim",
    "victim_seed": "victim.seed",
    "base_url": "victim.base_url",
    "defense": "defense.kind",
    "eps_per_dim": "defense.eps_per_dim",
    "noise_scale": "defense.noise_scale",
    "local_dim": "local.dim",
    "local_seed": "local.seed",
}


def _configure_logging(level: str) -> None:
    logger.remove()
    logger.add(sys.stderr, level=level.upper())


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    out = {}
    for flag, path in SPEC_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            out[path] = str(value) if isinstance(value, Path) else value
    return out


def _load_spec(args: argparse.Namespace) -> ExperimentSpec:
    """Arquivo JSON (opcional) + flags por cima"""
    overrides = _overrides(args)
    if args.config is not None:
        return ExperimentSpec.from_file(args.config, overrides)
    data: Dict[str, Any] = {}
    for path, value in overrides.items():
        set_dotted(data, path, value)
    return ExperimentSpec.model_validate(data)


def _add_victim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--victim", choices=[k.value for k in VictimKind])
    p.add_argument("--victim-dim", type=int, dest="victim_dim")
    p.add_argument("--d-victim", type=int, dest="d_victim")
    p.add_argument("--victim-seed", type=int, dest="victim_seed")
    p.add_argument("--base-url", dest="base_url")
    p.add_argument("--defense", choices=[k.value for k in DefenseKind])
    p.add_argument("--eps-per-dim", type=float, dest="eps_per_dim")
    p.add_argument("--noise-scale", type=float, dest="noise_scale")


def _add_spec_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON com qualquer subconjunto do ExperimentSpec")
    p.add_argument("--dataset", type=Path)
    p.add_argument("--corpus", type=Path, help="Corpus para treinar o gerador n-grama")
    p.add_argument("--lm", type=Path, help="Modelo n-grama salvo por train-lm")
    p.add_argument("--ngram-order", type=int, dest="ngram_order")
    p.add_argument("--samples", type=int)
    p.add_argument("--output-dir", type=Path, dest="output_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--k-s", type=int, dest="k_s")
    p.add_argument("--k-a", type=int, dest="k_a")
    p.add_argument("--k-b", type=int, dest="k_b")
    p.add_argument("--gamma", type=float)
    p.add_argument("--th-w", type=float, dest="th_w")
    p.add_argument("--t-max", type=int, dest="t_max")
    p.add_argument("--lambda", type=float, dest="lambda_")
    p.add_argument("--final-rerank", type=int, dest="final_rerank")
    p.add_argument("--conf-override", type=float, dest="conf_override")
    p.add_argument("--query-selection", choices=["score", "cosine"], dest="query_selection")
    p.add_argument("--rounding", choices=["nearest", "floor", "ceil"])
    p.add_argument("--dump-alignment", action="store_true", default=None, dest="dump_alignment")
    p.add_argument("--local-dim", type=int, dest="local_dim")
    p.add_argument("--local-seed", type=int, dest="local_seed")
    _add_victim_flags(p)


def _attack_command(args: argparse.Namespace) -> int:
    spec = _load_spec(args)
    if args.text is not None:
        report = run_single(args.text, spec)
        print(report.model_dump_json(indent=2))
        return 0 if report.ok else 1

    result = run_experiment(spec)
    print(json.dumps(result.summary.model_dump(mode="json"), indent=2))
    return 0


def _sweep_command(args: argparse.Namespace) -> int:
    spec = _load_spec(args)
    results = run_sweep(spec, parse_grid(args.grid))
    for label, summary in results:
        print(f"{label}\t" + ",".join(summary.csv_row()))
    return 0


def _serve_command(args: argparse.Namespace) -> int:
    spec = _load_spec(args)
    if spec.victim.kind == VictimKind.REMOTE:
        raise EmbinvError("serve needs a builtin victim (hash or linear)")
    api_key = get_settings().api_key if args.require_key else None
    serve_embed(build_victim(spec.victim), spec.defense, port=args.port, host=args.host, api_key=api_key)
    return 0


def _eval_command(args: argparse.Namespace) -> int:
    rows = [json.loads(line) for line in Path(args.input).read_text(encoding="utf-8").splitlines() if line.strip()]

    # COS só quando a vítima vem de flag ou do arquivo de config
    handle: Optional[VictimHandle] = None
    spec = _load_spec(args)
    if "victim" in spec.model_fields_set:
        handle = VictimHandle(build_victim(spec.victim), phase=Phase.EVAL)

    results: List[Dict[str, Any]] = []
    for row in rows:
        metrics = text_metrics(row["reconstruction"], row["reference"])
        if handle is not None:
            pair = handle.query([row["reconstruction"], row["reference"]])
            metrics["COS"] = cosine(pair[0], pair[1])
        results.append({**row, "metrics": metrics})

    if args.output is not None:
        with open(args.output, "w", encoding="utf-8", newline="\n") as f:
            for r in results:
                f.write(json.dumps(r) + "\n")

    names = list(results[0]["metrics"]) if results else []
    means = {n: round(float(np.mean([r["metrics"][n] for r in results])), 4) for n in names}
    print(json.dumps({"n": len(results), "means": means}, indent=2))
    return 0


def _train_lm_command(args: argparse.Namespace) -> int:
    lm = train_ngram(load_corpus(args.corpus), n=args.order, k=args.k)
    lm.save(args.out)
    logger.success(f"✓ Modelo salvo em {args.out}")
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embinv", description="Inversão de embeddings caixa-preta")
    parser.add_argument("--log-level", default=None, help="Sobrescreve EMBINV_LOG_LEVEL")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("attack", help="Ataca um texto (--text) ou um dataset")
    _add_spec_flags(p)
    p.add_argument("--text", help="Texto de referência para um único alvo")
    p.set_defaults(func=_attack_command)

    p = sub.add_parser("sweep", help="Grade de experimentos (ex.: attack.k_a=10,25,50)")
    _add_spec_flags(p)
    p.add_argument("--grid", action="append", required=True)
    p.set_defaults(func=_sweep_command)

    p = sub.add_parser("serve", help="Sobe uma vítima HTTP com defesa opcional")
    _add_spec_flags(p)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--require-key", action="store_true", help="Exige EMBINV_API_KEY como bearer")
    p.set_defaults(func=_serve_command)

    p = sub.add_parser("eval", help="Métricas sobre um JSONL com reference/reconstruction")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path)
    p.add_argument("--config", type=Path)
    _add_victim_flags(p)
    p.set_defaults(func=_eval_command)

    p = sub.add_parser("train-lm", help="Treina e salva o gerador n-grama")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--k", type=float, default=0.1)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_train_lm_command)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    _configure_logging(args.log_level or get_settings().log_level)

    try:
        return args.func(args)
    except ValidationError as e:
        logger.error(f"Configuração inválida:\n{e}")
        return 2
    except EmbinvError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1
    except ValueError as e:
        # get_settings sem API key para vítima remota
        logger.error(str(e))
        return 1
