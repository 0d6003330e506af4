import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as scipy_stats

from storebench.properties import PropertySet, parse_properties_text
from storebench.workload import (
    CHECKSUM_LEN,
    DistributionSpec,
    KeyGenerator,
    WorkloadConfig,
    WorkloadConfigError,
    ZipfSampler,
    generate_payload,
    payload_bytes,
    validate_payload,
    zipf_pmf,
)


def make_config(**overrides):
    return WorkloadConfig(**overrides).validate()


def uniform_config(num_keys, **overrides):
    return make_config(num_keys=num_keys, **overrides)


def zipf_config(num_keys, exponent=1.0):
    return make_config(num_keys=num_keys, distribution=DistributionSpec(kind="zipfian", exponent=exponent))


def window_config(num_keys, window, interval=30.0, inner="uniform"):
    return make_config(
        num_keys=num_keys,
        distribution=DistributionSpec(
            kind="slidingwindow",
            window_size=window,
            advance_interval_seconds=interval,
            inner=inner,
        ),
    )


# ---------------------------------------------------------------------------
# key selection


def test_uniform_singleton_space_always_key_zero():
    gen = KeyGenerator(uniform_config(1), seed=3)
    assert {gen.next_key(0.0) for _ in range(100)} == {"key-0"}


def test_zipf_two_keys_frequency_ratio_near_two():
    gen = KeyGenerator(zipf_config(2), seed=11)
    counts = Counter(gen.next_key_index(0.0) for _ in range(200_000))
    assert counts[0] / counts[1] == pytest.approx(2.0, abs=0.1)


def test_zipf_rank_maps_to_key_index_identity():
    # steep exponent makes rank order unambiguous in the counts
    gen = KeyGenerator(zipf_config(3, exponent=3.0), seed=5)
    counts = Counter(gen.next_key_index(0.0) for _ in range(50_000))
    assert counts[0] > counts[1] > counts[2]
    expected = zipf_pmf(3, 3.0)
    assert counts[0] / 50_000 == pytest.approx(expected[0], abs=0.02)


def test_sliding_window_keys_stay_inside_window():
    # numKeys=15, W=10: after 2 advances offset = 20 % 15 = 5
    cfg = window_config(15, 10, interval=1.0)
    gen = KeyGenerator(cfg, seed=1, window_epoch=100.0)
    now = 100.0 + 2.0
    indices = {gen.next_key_index(now) for _ in range(500)}
    assert gen.window_offset(now) == 5
    assert indices <= set(range(5, 15))
    assert len(indices) == 10  # uniform inner covers the whole window


def test_sliding_window_wraps_modulo_num_keys():
    cfg = window_config(10, 4, interval=1.0)
    gen = KeyGenerator(cfg, seed=2, window_epoch=0.0)
    # 3 advances: offset = 12 % 10 = 2
    assert gen.window_offset(3.0) == 2
    # offset 8 with W=4 wraps into {8, 9, 0, 1}
    assert gen.window_offset(2.0) == 8
    indices = {gen.next_key_index(2.0) for _ in range(300)}
    assert indices <= {8, 9, 0, 1}


@given(advances=st.integers(min_value=0, max_value=50))
def test_window_offset_after_k_advances(advances):
    cfg = window_config(101, 7, interval=2.0)
    gen = KeyGenerator(cfg, seed=0, window_epoch=0.0)
    now = advances * 2.0 + 0.5
    assert gen.window_offset(now) == (advances * 7) % 101


def test_window_inner_zipfian_concentrates_at_window_start():
    cfg = window_config(100, 10, interval=60.0, inner="zipfian")
    gen = KeyGenerator(cfg, seed=9)
    counts = Counter(gen.next_key_index(0.0) for _ in range(20_000))
    assert set(counts) <= set(range(10))
    assert counts[0] > counts[9]


def test_identical_seed_and_schedule_reproduces_sequence():
    cfg = window_config(50, 10, interval=5.0)
    schedule = [i * 1.7 for i in range(200)]
    first = KeyGenerator(cfg, seed=42, window_epoch=0.0)
    second = KeyGenerator(cfg, seed=42, window_epoch=0.0)
    assert [first.next_key(t) for t in schedule] == [second.next_key(t) for t in schedule]


def test_different_seeds_differ():
    cfg = uniform_config(1000)
    a = KeyGenerator(cfg, seed=1)
    b = KeyGenerator(cfg, seed=2)
    assert [a.next_key(0) for _ in range(50)] != [b.next_key(0) for _ in range(50)]


# ---------------------------------------------------------------------------
# value indices


def test_value_index_singleton():
    gen = KeyGenerator(uniform_config(10, num_values=1), seed=0)
    assert {gen.next_value_index() for _ in range(50)} == {0}


def test_value_index_uniform_frequencies():
    gen = KeyGenerator(uniform_config(10, num_values=4), seed=8)
    draws = 1_000_000
    counts = Counter(gen.next_value_index() for _ in range(draws))
    for index in range(4):
        assert counts[index] / draws == pytest.approx(0.25, abs=0.01)


def test_value_index_deterministic_under_seed():
    cfg = uniform_config(10, num_values=16)
    first = [KeyGenerator(cfg, seed=4).next_value_index() for _ in range(100)]
    second = [KeyGenerator(cfg, seed=4).next_value_index() for _ in range(100)]
    assert first == second


# ---------------------------------------------------------------------------
# distribution conformance (chi-square spot check; the full sweep runs in
# the acceptance suite)


@pytest.mark.parametrize("num_keys", [10, 100])
def test_uniform_chi_square_not_rejected(num_keys):
    gen = KeyGenerator(uniform_config(num_keys), seed=13)
    draws = 100_000
    counts = Counter(gen.next_key_index(0.0) for _ in range(draws))
    observed = [counts[i] for i in range(num_keys)]
    _, p_value = scipy_stats.chisquare(observed)
    assert p_value > 0.001


def test_zipf_chi_square_not_rejected():
    num_keys, draws = 100, 100_000
    gen = KeyGenerator(zipf_config(num_keys), seed=17)
    counts = Counter(gen.next_key_index(0.0) for _ in range(draws))
    observed = [counts[i] for i in range(num_keys)]
    expected = [p * draws for p in zipf_pmf(num_keys, 1.0)]
    _, p_value = scipy_stats.chisquare(observed, expected)
    assert p_value > 0.001


def test_zipf_sampler_rejects_bad_parameters():
    with pytest.raises(ValueError):
        ZipfSampler(0, 1.0, random.Random(0))
    with pytest.raises(ValueError):
        ZipfSampler(10, 0.0, random.Random(0))


# ---------------------------------------------------------------------------
# payloads


def test_fixed_size_payload_is_exact():
    gen = KeyGenerator(uniform_config(10, data_size=128), seed=0)
    for _ in range(20):
        assert len(gen.next_payload()) == 128


def test_variable_payload_mean_is_uniform_over_one_to_data_size():
    rng = random.Random(21)
    lengths = [
        len(generate_payload(0, 128, True, rng))
        for _ in range(100_000)
    ]
    mean = sum(lengths) / len(lengths)
    assert mean == pytest.approx(64.5, abs=2.0)
    assert min(lengths) >= 1
    assert max(lengths) <= 128


def test_payload_deterministic_for_same_value_index_and_length():
    assert payload_bytes(7, 100) == payload_bytes(7, 100)
    assert payload_bytes(7, 100) != payload_bytes(8, 100)
    assert validate_payload(payload_bytes(7, 100))


@given(
    value_index=st.integers(min_value=0, max_value=10_000),
    length=st.integers(min_value=CHECKSUM_LEN + 1, max_value=256),
    flip=st.integers(min_value=0, max_value=255),
)
@settings(max_examples=200)
def test_single_byte_flip_after_header_fails_validation(value_index, length, flip):
    payload = bytearray(payload_bytes(value_index, length))
    position = CHECKSUM_LEN + (flip % (length - CHECKSUM_LEN))
    payload[position] ^= 0x01
    assert not validate_payload(bytes(payload))


def test_tiny_payloads_have_no_header_and_pass_validation():
    data = payload_bytes(3, 5)
    assert len(data) == 5
    assert validate_payload(data)


# ---------------------------------------------------------------------------
# config round-trips


def test_config_round_trips_through_properties_file_format():
    cfg = make_config(
        num_keys=100_000,
        num_values=50,
        data_size=1024,
        num_writers=8,
        num_readers=32,
        write_rate_limit=20,
        read_rate_limit=80,
        user_variable_data_size=True,
        distribution=DistributionSpec(
            kind="slidingwindow", window_size=500, advance_interval_seconds=30.0
        ),
    )
    text = "".join(f"{k}={v}\n" for k, v in cfg.to_property_map().items())
    parsed = parse_properties_text(text)
    assert WorkloadConfig.from_properties(parsed) == cfg


@given(
    num_keys=st.integers(min_value=1, max_value=10**6),
    data_size=st.integers(min_value=1, max_value=10**4),
    readers=st.integers(min_value=0, max_value=64),
    read_rate=st.floats(min_value=0, max_value=10**5, allow_nan=False),
    kind=st.sampled_from(["uniform", "zipfian"]),
)
@settings(max_examples=50)
def test_config_property_round_trip_identity(num_keys, data_size, readers, read_rate, kind):
    cfg = make_config(
        num_keys=num_keys,
        data_size=data_size,
        num_readers=readers,
        read_rate_limit=read_rate,
        distribution=DistributionSpec(kind=kind),
    )
    assert WorkloadConfig.from_properties(cfg.to_property_map()) == cfg


def test_config_from_property_set_uses_winning_values():
    props = PropertySet(defaults={"numKeys": "1000"})
    props.set_property("numKeys", "2000")
    assert WorkloadConfig.from_properties(props).num_keys == 2000


@pytest.mark.parametrize(
    "overrides",
    [
        {"num_keys": 0},
        {"num_values": 0},
        {"data_size": 0},
        {"num_readers": -1},
        {"read_rate_limit": -5.0},
    ],
)
def test_invalid_config_rejected(overrides):
    with pytest.raises(WorkloadConfigError):
        make_config(**overrides)


@pytest.mark.parametrize(
    "dist",
    [
        DistributionSpec(kind="slidingwindow", window_size=0, advance_interval_seconds=1),
        DistributionSpec(kind="slidingwindow", window_size=20, advance_interval_seconds=1),
        DistributionSpec(kind="slidingwindow", window_size=5, advance_interval_seconds=0),
        DistributionSpec(kind="slidingwindow", window_size=5, advance_interval_seconds=1, inner="slidingwindow"),
        DistributionSpec(kind="zipfian", exponent=0.0),
        DistributionSpec(kind="mystery"),
    ],
)
def test_invalid_distribution_rejected(dist):
    with pytest.raises(WorkloadConfigError):
        make_config(num_keys=10, distribution=dist)
