import math
from fractions import Fraction

import pytest
from pydantic import ValidationError

from gibbs_occ.config import Settings, get_settings
from gibbs_occ.errors import (
    EXIT_STATISTICAL,
    EXIT_USAGE,
    ConfigurationError,
    ContractError,
    DiagnosticError,
    DomainError,
    InstanceTooLargeError,
    WeightsExhaustedError,
    error_payload,
    exit_code_for,
)
from gibbs_occ.schemas import PmfRow, PmfTable, RunConfig, json_number, parse_json_number


def test_settings_defaults():
    settings = get_settings()
    assert settings.exact_max_order == 64
    assert settings.min_ess == 50.0
    assert settings.default_seed == 0
    assert settings.log_level == "WARNING"


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("GIBBS_OCC_THREADS", "2")
    monkeypatch.setenv("GIBBS_OCC_LOG_LEVEL", "debug")
    get_settings.cache_clear()
    settings = get_settings()
    assert settings.threads == 2
    assert settings.log_level == "DEBUG"


@pytest.mark.parametrize("field,value", [("log_level", "LOUD"), ("threads", 0), ("series_rtol", 2.0),
                                         ("jump_tail_mass", 0.0)])
def test_settings_validation(field, value):
    with pytest.raises(ValidationError):
        Settings(**{field: value})


def test_invalid_environment_raises_configuration_error(monkeypatch):
    monkeypatch.setenv("GIBBS_OCC_EXACT_MAX_ORDER", "-3")
    get_settings.cache_clear()
    with pytest.raises(ConfigurationError):
        get_settings()


def test_exit_codes():
    assert exit_code_for(DiagnosticError("no bracket")) == EXIT_STATISTICAL
    for exc in (DomainError("x"), ContractError("x"), InstanceTooLargeError("x"), ValueError("x")):
        assert exit_code_for(exc) == EXIT_USAGE


def test_error_payload():
    assert error_payload(WeightsExhaustedError("only 3 weights", m=5)) == {
        "error": "weights_exhausted", "message": "only 3 weights", "details": {"m": "5"},
    }
    assert error_payload(DomainError("bad theta")) == {"error": "domain_error", "message": "bad theta"}
    assert error_payload(KeyError("k"))["error"] == "usage_error"
    assert isinstance(DomainError("x"), ValueError)


def test_json_number():
    assert json_number(Fraction(10, 3)) == "10/3"
    assert json_number(Fraction(4, 2)) == 2
    assert json_number(math.inf) is None
    assert json_number(float("nan")) is None
    assert json_number(0.25) == 0.25
    assert json_number(True) == 1
    assert parse_json_number("10/3") == Fraction(10, 3)
    assert parse_json_number(None) is None


def test_run_config_rejects_mixed_parameters():
    with pytest.raises(ValidationError):
        RunConfig(family="cayley", star=True, theta="1")
    with pytest.raises(ValidationError):
        RunConfig(family="cayley", gamma="1")
    cfg = RunConfig(family="cayley", theta="1/3", mode="exact")
    assert cfg.number(cfg.theta) == Fraction(1, 3)


def test_pmf_table_validation():
    with pytest.raises(ValidationError):
        PmfTable(kind="pnk", family="logseries", rows=[PmfRow(value=1, probability="-1/2")])
    table = PmfTable(kind="pnk", family="logseries", exact=True,
                     rows=[PmfRow(value=1, probability="1/3"), PmfRow(value=2, probability="2/3")])
    assert table.check_normalized()
