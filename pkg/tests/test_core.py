import pytest
from hypothesis import given, strategies as st

from fecsim.core import (
    CodingParams,
    ConfigError,
    PolicySpec,
    SimConfig,
    check_config,
    config_from_text,
    load_config,
    save_config,
    validate_config,
)
from fecsim.servicemodels import Exponential, ShiftedExponential, TwoPoint


def cfg(**kw):
    base = dict(arrival_rate=50.0, num_threads=16, coding=CodingParams(17, 2), policy=PolicySpec("greedy"),
                service_model=Exponential(6.25), num_arrivals=100)
    base.update(kw)
    return SimConfig(**base)


def test_n_equal_to_l_plus_k_minus_one_is_valid():
    assert validate_config(cfg()) == []


def test_n_one_short_of_bound_fails_in_strict_mode():
    errors = validate_config(cfg(coding=CodingParams(16, 2)))
    assert len(errors) == 1
    assert errors[0].startswith("coding.n") and "n < L+k-1" in errors[0]


def test_non_strict_mode_accepts_small_n():
    assert validate_config(cfg(coding=CodingParams(16, 2), strict_chunk_limit=False)) == []


def test_k_zero_reported():
    errors = validate_config(cfg(coding=CodingParams(4, 0)))
    assert any("k >= 1 violated" in e for e in errors)


def test_every_violation_is_reported():
    bad = cfg(arrival_rate=-1.0, num_threads=0, num_arrivals=0, replications=0)
    paths = {e.split(":")[0] for e in validate_config(bad)}
    assert {"arrival_rate", "num_threads", "num_arrivals", "replications"} <= paths


def test_fixed_redundancy_m_outside_k_n():
    assert validate_config(cfg(policy=PolicySpec("fixed_redundancy", 1)))
    assert validate_config(cfg(policy=PolicySpec("fixed_redundancy", 18)))
    assert validate_config(cfg(policy=PolicySpec("fixed_redundancy", 17))) == []


def test_check_config_raises_with_list():
    with pytest.raises(ConfigError) as err:
        check_config(cfg(coding=CodingParams(16, 2)))
    assert err.value.errors


def test_policy_spec_roundtrip():
    for text in ("greedy", "sharing", "round_robin", "fixed_redundancy(m=10)"):
        assert str(PolicySpec.parse(text)) == text
    with pytest.raises(ConfigError):
        PolicySpec.parse("lifo")
    with pytest.raises(ConfigError):
        PolicySpec.parse("fixed_redundancy")


def test_text_roundtrip(tmp_path):
    c = cfg(service_model=ShiftedExponential(100.0, 1 / 39), policy=PolicySpec("fixed_redundancy", 7),
            crn_mode=True, master_seed=9)
    path = tmp_path / "c.ini"
    save_config(c, path)
    assert load_config(path) == c
    assert load_config(path).fingerprint() == c.fingerprint()


def test_unknown_and_missing_keys_are_errors():
    text = cfg().to_text()
    with pytest.raises(ConfigError, match="unknown"):
        config_from_text(text + "colour = blue\n")
    missing = "\n".join(line for line in text.splitlines() if not line.startswith("arrival_rate"))
    with pytest.raises(ConfigError, match="arrival_rate"):
        config_from_text(missing)


def test_fingerprint_tracks_every_field():
    a = cfg()
    assert a.fingerprint() == cfg().fingerprint()
    assert a.fingerprint() != cfg(master_seed=1).fingerprint()
    assert a.fingerprint() != cfg(service_model=Exponential(6.0)).fingerprint()


def test_attempt_bounds():
    assert cfg().max_attempts == 17
    assert cfg(policy=PolicySpec("sharing")).max_attempts == 2
    assert cfg(policy=PolicySpec("fixed_redundancy", 5)).max_attempts == 5
    assert cfg(coding=CodingParams(40, 2)).max_attempts == 17


def test_model_extension_flag():
    assert not cfg().model_extension
    assert not cfg(service_model=TwoPoint(2 / 3, 0.0, 3000.0)).model_extension
    assert cfg(coding=CodingParams(16, 2), strict_chunk_limit=False).model_extension
    assert not cfg(coding=CodingParams(17, 2), strict_chunk_limit=False).model_extension


@given(L=st.integers(1, 32), k=st.integers(1, 8), slack=st.integers(-3, 3))
def test_strict_bound_property(L, k, slack):
    n = L + k - 1 + slack
    if n < k:
        return
    errors = validate_config(cfg(num_threads=L, coding=CodingParams(n, k)))
    assert (errors == []) == (slack >= 0)
