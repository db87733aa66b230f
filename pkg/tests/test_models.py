import numpy as np
import pytest
from pydantic import ValidationError

from embinv.exceptions import InvalidConfigError
from embinv.models import (
    AttackConfig,
    Phase,
    QueryLedger,
    RunReport,
    count_tokens,
    ledger_record,
    validate_config,
)


def test_defaults_are_valid():
    """Os defaults passam na validação"""
    cfg = AttackConfig()
    assert validate_config(cfg) is cfg
    assert (cfg.k_s, cfg.k_a, cfg.k_b, cfg.gamma, cfg.th_w, cfg.t_max) == (1000, 50, 10, 0.8, 0.9, 32)
    assert cfg.lambda_ == 0.1


def test_lambda_alias():
    """'lambda' é aceito como nome do campo"""
    cfg = AttackConfig.model_validate({"lambda": 0.5})
    assert cfg.lambda_ == 0.5
    assert cfg.model_dump(by_alias=True)["lambda"] == 0.5


def test_gamma_out_of_range():
    with pytest.raises(InvalidConfigError, match=r"gamma must lie in \(0,1\)") as info:
        validate_config(AttackConfig(gamma=1.0))
    assert info.value.field == "gamma"


def test_kb_exceeds_ks():
    with pytest.raises(InvalidConfigError, match="k_b exceeds k_s") as info:
        validate_config(AttackConfig(k_s=5, k_b=6))
    assert info.value.field == "k_b"


def test_first_violation_reported():
    """gamma é checado antes de k_b"""
    with pytest.raises(InvalidConfigError) as info:
        validate_config(AttackConfig(gamma=2.0, k_s=1, k_b=3))
    assert info.value.field == "gamma"


@pytest.mark.parametrize(
    "kwargs, field",
    [
        ({"th_w": 0.0}, "th_w"),
        ({"k_b": 0}, "k_b"),
        ({"t_max": 0}, "t_max"),
        ({"lambda_": 0.0}, "lambda"),
        ({"k_a": 0}, "k_a"),
        ({"final_rerank": -1}, "final_rerank"),
        ({"conf_override": 1.5}, "conf_override"),
    ],
)
def test_invalid_fields(kwargs, field):
    with pytest.raises(InvalidConfigError) as info:
        validate_config(AttackConfig(**kwargs))
    assert info.value.field == field


def test_unknown_field_rejected():
    with pytest.raises(ValidationError):
        AttackConfig(beam=3)


def test_count_tokens():
    assert count_tokens("the cat  sat") == 3
    assert count_tokens("") == 0


def test_ledger_record_and_sum():
    """Contagens vão para a fase certa e somam campo a campo"""
    a = QueryLedger()
    ledger_record(a, Phase.ONLINE, 3, 10)
    ledger_record(a, Phase.SETUP, 1, 4)
    b = QueryLedger().record(Phase.ONLINE, 2, 5).record(Phase.EVAL, 1, 1)
    total = a + b
    assert (total.online_sentences, total.online_tokens) == (5, 15)
    assert (total.setup_sentences, total.eval_sentences) == (1, 1)
    assert total.offline_sentences == 0


def test_ledger_rejects_negative():
    with pytest.raises(ValueError):
        QueryLedger().record(Phase.ONLINE, -1, 0)


def test_ledger_snapshot_is_independent():
    ledger = QueryLedger().record(Phase.ONLINE, 1, 1)
    snap = ledger.snapshot()
    ledger.record(Phase.ONLINE, 1, 1)
    assert snap.online_sentences == 1


def test_report_trace_must_match_iterations():
    with pytest.raises(ValidationError):
        RunReport(target_id="0", conf_trace=[0.5], iterations_used=2)


def test_report_metric_scale():
    with pytest.raises(ValidationError):
        RunReport(target_id="0", metrics={"COS": 1.5})
    report = RunReport(target_id="0", metrics={"BLEU-1": 42.0, "COS": -0.2})
    assert report.ok


def test_ledger_counters_never_decrease():
    """Sequências aleatórias de registros: nenhum contador diminui"""
    rng = np.random.default_rng(12)
    phases = list(Phase)
    for _ in range(20):
        ledger = QueryLedger()
        before = ledger.model_dump()
        for _ in range(30):
            phase = phases[int(rng.integers(len(phases)))]
            ledger_record(ledger, phase, int(rng.integers(0, 5)), int(rng.integers(0, 40)))
            after = ledger.model_dump()
            assert all(after[name] >= before[name] for name in before)
            before = after


@pytest.mark.parametrize(
    "cfg",
    [AttackConfig(), AttackConfig(k_s=64, k_a=20, k_b=5, t_max=12, final_rerank=3), AttackConfig(gamma=0.5, th_w=1.0)],
)
def test_validate_config_is_idempotent(cfg):
    once = validate_config(cfg)
    twice = validate_config(once)
    assert twice is cfg
    assert twice.model_dump() == cfg.model_dump()
