import json
import math
import warnings

import numpy as np
import pytest

from hermite_bench.powerlog import (
    DEFAULT_EDP_WEIGHTS,
    DEFAULT_WINDOW_S,
    NegativeEnergyWarning,
    PowerTrace,
    TraceParseError,
    TraceRangeError,
    build_energy_report,
    edp,
    edp_marginal,
    energy_to_solution,
    integrate_energy,
    parse_trace,
    read_trace,
)


def const_trace(watts, span=180.0, step=1.0):
    t = np.arange(0.0, span + step / 2, step)
    return PowerTrace(t, np.full_like(t, watts))


def trace_text(t, p):
    return "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(t, p))


class TestParse:
    def test_two_samples(self):
        tr = parse_trace("0.0,10.0\n1.0,10.0")
        assert tr.t.tolist() == [0.0, 1.0] and tr.p.tolist() == [10.0, 10.0]

    def test_header_comments_and_bytes(self):
        tr = parse_trace(b"# meter dump\nt,p\n\n0,1.5\n# mid comment\n2,2.5\n")
        assert tr.t.tolist() == [0.0, 2.0] and tr.p.tolist() == [1.5, 2.5]

    def test_empty_file(self):
        with pytest.raises(TraceParseError):
            parse_trace("")

    def test_single_sample(self):
        with pytest.raises(TraceParseError):
            parse_trace("0,1\n")

    @pytest.mark.parametrize(
        "text, lineno",
        [
            ("0,1\n1,1\n1,1\n", 3),
            ("0,1\n1,-2\n", 2),
            ("# c\n0,1\n1,abc\n", 3),
            ("0,1\n1,1,1\n", 2),
            ("0,1\nnan,1\n", 2),
            ("0,1\n2,1\n1,1\n", 3),
        ],
    )
    def test_errors_carry_line_number(self, text, lineno):
        with pytest.raises(TraceParseError) as exc:
            parse_trace(text)
        assert exc.value.lineno == lineno
        assert f"line {lineno}" in str(exc.value)

    def test_constant_file_integrates_to_1800(self, tmp_path):
        t = np.arange(181.0)
        path = tmp_path / "const.csv"
        path.write_text("t,p\n" + trace_text(t, np.full_like(t, 10.0)))
        tr = read_trace(path)
        assert integrate_energy(tr, (0.0, 180.0)) == 1800.0

    def test_read_trace_names_file(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,1\n0,1\n")
        with pytest.raises(TraceParseError, match="bad.csv"):
            read_trace(path)

    def test_powertrace_validation(self):
        with pytest.raises(ValueError):
            PowerTrace([0.0, 1.0], [1.0, -1.0])
        with pytest.raises(ValueError):
            PowerTrace([0.0, 0.0], [1.0, 1.0])
        with pytest.raises(ValueError):
            PowerTrace([0.0], [1.0])


class TestIntegrate:
    def test_constant(self):
        assert integrate_energy(const_trace(10.0), (0.0, 180.0)) == 1800.0

    def test_ramp(self):
        t = np.linspace(0.0, 180.0, 7)
        tr = PowerTrace(t, t * 20.0 / 180.0)
        assert integrate_energy(tr, (0.0, 180.0)) == pytest.approx(1800.0, rel=1e-15)

    def test_sine_at_1hz(self):
        t = np.arange(0.0, 181.0)
        tr = PowerTrace(t, 10.0 + 5.0 * np.sin(2 * np.pi * t / 60.0))
        assert integrate_energy(tr, (0.0, 180.0)) == pytest.approx(1800.0, rel=1e-3)

    def test_edge_interpolation(self):
        tr = PowerTrace([0.0, 10.0], [0.0, 10.0])
        # p(t) = t, integral over [2, 5] = (25 - 4) / 2
        assert integrate_energy(tr, (2.0, 5.0)) == pytest.approx(10.5, rel=1e-15)

    @pytest.mark.parametrize("window", [(-1.0, 10.0), (0.0, 181.0), (5.0, 5.0), (6.0, 5.0)])
    def test_bad_window(self, window):
        with pytest.raises(TraceRangeError):
            integrate_energy(const_trace(1.0), window)

    def test_additive(self):
        rng = np.random.default_rng(7)
        t = np.cumsum(rng.uniform(0.1, 2.0, 200))
        tr = PowerTrace(t, rng.uniform(0.0, 50.0, 200))
        a, c = t[0], t[-1]
        b = rng.uniform(a, c)
        whole = integrate_energy(tr, (a, c))
        assert integrate_energy(tr, (a, b)) + integrate_energy(tr, (b, c)) == pytest.approx(whole, rel=1e-12)


class TestEnergyToSolution:
    def test_golden(self):
        assert energy_to_solution(5400.0, 1800.0, 60.0, 180.0) == pytest.approx(1200.0, rel=1e-15)

    def test_equal_energies(self):
        for t in (1.0, 60.0, 1e4):
            assert energy_to_solution(42.0, 42.0, t) == 0.0

    def test_unit_ratio(self):
        assert energy_to_solution(5400.0, 1800.0, 180.0, 180.0) == 3600.0

    def test_negative_warns_and_is_not_clamped(self):
        with pytest.warns(NegativeEnergyWarning):
            assert energy_to_solution(100.0, 200.0, 90.0, 180.0) == -50.0

    @pytest.mark.parametrize("t, w", [(0.0, 180.0), (-1.0, 180.0), (60.0, 0.0), (60.0, math.inf)])
    def test_domain(self, t, w):
        with pytest.raises(ValueError):
            energy_to_solution(1.0, 0.0, t, w)

    def test_linearity(self):
        base = energy_to_solution(500.0, 100.0, 30.0)
        assert energy_to_solution(900.0, 100.0, 30.0) == pytest.approx(2 * base)
        assert energy_to_solution(500.0, 100.0, 60.0) == pytest.approx(2 * base)


class TestEdp:
    def test_goldens(self):
        assert edp(5400.0, 60.0, 180.0, 1) == pytest.approx(1800.0, rel=1e-15)
        assert edp(5400.0, 60.0, 180.0, 3) == pytest.approx(200.0, rel=1e-15)

    def test_unit_ratio(self):
        for w in (1, 2, 3):
            assert edp(5400.0, 180.0, 180.0, w) == 5400.0

    @pytest.mark.parametrize("w", [0, 4, -1, 1.5, True])
    def test_weight_domain(self, w):
        with pytest.raises(ValueError):
            edp(1.0, 1.0, 180.0, w)

    def test_override_widens_weights(self):
        assert edp(5400.0, 90.0, 180.0, 5, any_weight=True) == pytest.approx(5400.0 / 32)
        with pytest.raises(ValueError):
            edp(1.0, 1.0, 180.0, 0, any_weight=True)

    def test_marginal_variant(self):
        assert edp_marginal(1200.0, 60.0, 180.0, 1) == 1200.0
        assert edp_marginal(1200.0, 60.0, 180.0, 3) == pytest.approx(1200.0 / 9)

    def test_monotone_steeper_for_larger_w(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            e = rng.uniform(1, 1e4)
            t1, t2 = np.sort(rng.uniform(1, 500, 2))
            if t1 == t2:
                continue
            for w in (1, 2):
                r_w = edp(e, t2, 180.0, w) / edp(e, t1, 180.0, w)
                r_w1 = edp(e, t2, 180.0, w + 1) / edp(e, t1, 180.0, w + 1)
                assert 1.0 < r_w < r_w1


class TestReport:
    def test_composition_golden(self):
        rep = build_energy_report(const_trace(10.0), const_trace(30.0), 60.0, 180.0, (1, 3))
        assert rep.e_baseline == 1800.0 and rep.e_device_baseline == 5400.0
        assert rep.e_impl == pytest.approx(1200.0, rel=1e-9)
        assert rep.edp[1] == pytest.approx(1800.0, rel=1e-9)
        assert rep.edp[3] == pytest.approx(200.0, rel=1e-9)
        assert set(rep.edp) == {1, 3} and rep.edp_marginal == {}
        assert rep.anomalies == []

    def test_identical_traces(self):
        tr = const_trace(12.5)
        assert build_energy_report(tr, tr, 60.0).e_impl == 0.0

    def test_halving_time_divides_w3_by_8(self):
        idle, act = const_trace(10.0), const_trace(30.0)
        a = build_energy_report(idle, act, 60.0, weights=(3,))
        b = build_energy_report(idle, act, 30.0, weights=(3,))
        assert a.edp[3] / b.edp[3] == pytest.approx(8.0, rel=1e-15)

    def test_uses_first_window_of_each_trace(self):
        t = np.arange(0.0, 400.0)
        idle = PowerTrace(t + 1000.0, np.where(t <= 180, 10.0, 99.0))
        rep = build_energy_report(idle, const_trace(30.0), 60.0)
        assert rep.e_baseline == 1800.0

    def test_short_trace(self):
        with pytest.raises(TraceRangeError):
            build_energy_report(const_trace(10.0, span=100.0), const_trace(30.0), 60.0)

    def test_negative_anomaly_is_recorded(self):
        with pytest.warns(NegativeEnergyWarning):
            rep = build_energy_report(const_trace(30.0), const_trace(10.0), 60.0)
        assert rep.e_impl == pytest.approx(-1200.0)
        assert rep.anomalies == ["negative_energy_to_solution"]

    def test_serialization(self):
        rep = build_energy_report(const_trace(10.0), const_trace(30.0), 60.0, subtract_baseline=True)
        flat = json.loads(rep.to_json())
        assert "\n" not in rep.to_json()
        assert [k for k in flat if k.startswith("edp_w")] == ["edp_w1", "edp_w3"]
        assert flat["edp_marginal_w1"] == pytest.approx(1200.0)
        kv = dict(line.split("=", 1) for line in rep.to_kv().splitlines())
        assert float(kv["E_impl_J"]) == flat["E_impl_J"]
        assert float(kv["delta_T3_s"]) == 180.0

    def test_defaults(self):
        assert DEFAULT_WINDOW_S == 180.0
        assert DEFAULT_EDP_WEIGHTS == (1, 3)


def test_no_warning_on_normal_run():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_energy_report(const_trace(10.0), const_trace(30.0), 60.0)
