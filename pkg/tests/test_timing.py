import pytest

from gsgw.exceptions.exceptions import InvalidInputError
from gsgw.services.timing import TimingRecorder, doubling_ratios, loglog_slope


class TestTimingRecorder:
    def test_warmup_calls_are_not_recorded(self):
        calls = []
        recorder = TimingRecorder(warmup=2)
        stats = recorder.time_call(lambda: calls.append(1), repeats=3)
        assert len(calls) == 5
        assert stats.repeats == 3
        assert len(recorder.durations_ms) == 3
        assert stats.mean_ms >= 0.0

    def test_errors_are_counted_and_raised(self):
        recorder = TimingRecorder(warmup=0)

        def boom():
            raise RuntimeError("boom")

        with pytest.raises(RuntimeError):
            recorder.time_call(boom, repeats=2)
        assert recorder.summary() == {"calls": 0, "error_count": 1, "avg_ms": 0.0}

    def test_repeats_must_be_positive(self):
        with pytest.raises(InvalidInputError):
            TimingRecorder().time_call(lambda: None, repeats=0)


class TestScaling:
    def test_quadratic_slope(self):
        sizes = [100, 200, 400, 800]
        assert loglog_slope(sizes, [n ** 2 * 1e-3 for n in sizes]) == pytest.approx(2.0)

    def test_slope_needs_two_sizes(self):
        with pytest.raises(InvalidInputError):
            loglog_slope([100], [1.0])

    def test_plain_ratios(self):
        assert doubling_ratios([1.0, 2.0, 8.0]) == [2.0, 4.0]

    def test_ratios_rescaled_to_doubling(self):
        # linear timings over a tenfold size step double per doubling
        assert doubling_ratios([1.0, 10.0], [10_000, 100_000]) == [pytest.approx(2.0)]
        assert doubling_ratios([1.0, 4.0], [100, 200]) == [pytest.approx(4.0)]

    def test_sizes_must_increase(self):
        with pytest.raises(InvalidInputError):
            doubling_ratios([1.0, 2.0], [200, 100])
