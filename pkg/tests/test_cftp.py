"""Random streams, forward runs, regeneration scans and coupling from the past."""

from fractions import Fraction

import pytest

from src.cftp.engine import (
    Method,
    coalescence_time,
    coupled_perfect_sample,
    forward_simulate,
    kernel_regeneration_time,
    perfect_sample,
    regeneration_time,
)
from src.cftp.random_stream import RandomnessStream
from src.cftp.trajectory_io import pack_symbols, read_csv, read_packed, write_csv, write_packed
from src.errors import ContextTooShortError, ParameterError, PreconditionError, ScanOverflowError
from src.kernels.bk_kernels import FullBK, lower, upper
from src.kernels.symbols import Context
from src.kernels.table_kernel import TableKernel

HALF = 1 << 52


class TestRandomnessStream:
    def test_positions_are_reproducible(self):
        a = RandomnessStream(7, replicate=3, purpose="x")
        b = RandomnessStream(7, replicate=3, purpose="x")
        positions = (-5000, -1, 0, 12345)
        # b is read in the opposite order
        expected = {j: b.raw_at(j) for j in reversed(positions)}
        assert [a.raw_at(j) for j in positions] == [expected[j] for j in positions]

    def test_purposes_are_independent_streams(self):
        a = RandomnessStream(7, purpose="dbar")
        b = RandomnessStream(7, purpose="marginal")
        assert a.raw_range(0, 31).tolist() != b.raw_range(0, 31).tolist()

    def test_range_crosses_blocks(self):
        stream = RandomnessStream(11, block_size=16, cache_blocks=2)
        values = stream.raw_range(-40, 40).tolist()
        assert values == [stream.raw_at(j) for j in range(-40, 41)]

    def test_uniforms_in_unit_interval(self, stream):
        assert all(0.0 <= stream.uniform_at(j) < 1.0 for j in range(-100, 100))

    def test_bad_seed(self):
        with pytest.raises(ParameterError):
            RandomnessStream(-1)


class TestForward:
    def test_extremal_pasts_stay_ordered(self, small_params, stream):
        g = lower(small_params, 2)
        plus = forward_simulate(g, 1, -200, 0, stream)
        minus = forward_simulate(g, -1, -200, 0, stream)
        assert len(plus) == 201
        assert all(p >= m for p, m in zip(plus, minus))

    def test_explicit_past(self, two_state_params, stream):
        path = forward_simulate(lower(two_state_params, 1), Context.of([1]), 0, 9, stream)
        assert set(path) <= {1, -1}

    def test_short_past(self, small_params, stream):
        with pytest.raises(ContextTooShortError):
            forward_simulate(lower(small_params, 2), Context.of([1]), 0, 5, stream)


class TestRegeneration:
    def test_order_one_regeneration(self, stream):
        eta = regeneration_time(1, Fraction(1, 4), stream)
        assert stream.raw_at(-eta) < HALF
        assert all(stream.raw_at(-j) >= HALF for j in range(eta))

    def test_run_of_three(self, stream):
        eta = regeneration_time(3, "1/4", stream)
        assert eta >= 2
        assert all(stream.raw_at(-j) < HALF for j in range(eta - 2, eta + 1))

    def test_scan_overflow(self, stream):
        with pytest.raises(ScanOverflowError):
            regeneration_time(60, Fraction(1, 4), stream, cap=1000)

    def test_order_must_be_positive(self, stream):
        with pytest.raises(ParameterError):
            regeneration_time(0, Fraction(1, 4), stream)

    def test_order_zero_kernel_regenerates_immediately(self, two_state_params, stream):
        assert kernel_regeneration_time(lower(two_state_params, 0), stream) == 0


class TestPerfectSampling:
    def test_sample_is_reproducible(self, small_params):
        g = lower(small_params, 2)
        first = perfect_sample(g, (0, 9), RandomnessStream(5, purpose="cftp"))
        second = perfect_sample(g, (0, 9), RandomnessStream(5, purpose="cftp"))
        assert first.sample == second.sample
        assert len(first.sample) == 10

    def test_coalescence_precedes_regeneration(self, small_params):
        for seed in range(20):
            result = perfect_sample(upper(small_params, 3), (0, 0), RandomnessStream(seed))
            assert result.coalescence_time <= result.regeneration_time

    def test_methods_agree_on_the_same_uniforms(self, small_params):
        g = lower(small_params, 2)
        sandwich = perfect_sample(g, (-3, 3), RandomnessStream(9), Method.MONOTONE_SANDWICH)
        regeneration = perfect_sample(g, (-3, 3), RandomnessStream(9), Method.REGENERATION_WINDOW)
        assert sandwich.sample == regeneration.sample

    def test_order_zero_kernel(self, two_state_params, stream):
        result = perfect_sample(lower(two_state_params, 0), (0, 99), stream)
        assert result.coalescence_time == 0
        assert len(result.sample) == 100

    def test_coalescence_time_of_order_zero(self, two_state_params, stream):
        assert coalescence_time(upper(two_state_params, 0), stream) == 0

    def test_coupled_blocks_are_ordered(self, small_params, stream):
        coupled = coupled_perfect_sample([lower(small_params, 2), upper(small_params, 2)], (0, 19), stream)
        high, low = coupled.blocks
        assert all(h >= l for h, l in zip(high, low))

    def test_full_model_refused(self, two_state_params, stream):
        with pytest.raises(PreconditionError):
            perfect_sample(FullBK(two_state_params), (0, 0), stream)

    def test_non_attractive_kernel_refused(self, stream):
        with pytest.raises(PreconditionError):
            perfect_sample(TableKernel.from_strings(1, ["3/4", "1/4"]), (0, 0), stream)

    def test_empty_window(self, small_params, stream):
        with pytest.raises(ParameterError):
            perfect_sample(lower(small_params, 1), (5, 4), stream)


class TestTrajectoryFiles:
    def test_csv_keeps_time_indices(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", -2, [1, -1, 1])
        assert read_csv(path) == (-2, [1, -1, 1])

    def test_packed_layout(self, tmp_path):
        symbols = [1, -1, -1, -1, -1, -1, -1, -1, 1]
        assert pack_symbols(symbols) == b"\x01\x01"
        path = write_packed(tmp_path / "t.bin", symbols)
        assert read_packed(path, len(symbols)) == symbols
