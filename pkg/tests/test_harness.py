import csv
import io
import json
import math

import numpy as np
import pytest

from evans_lab import erroranalysis as ea
from evans_lab import harness as hs
from evans_lab.harness import ConfigError, SweepConfig
from evans_lab.problem import spectral_context

HEADER = "lambda_re,lambda_im,h,method,backend,quantity,measured_abs,estimated_abs,ratio,comp1_abs,comp2_abs"


def cfg(**kw):
    kw.setdefault("workers", 1)
    return SweepConfig.from_dict(kw)


def parse(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestConfig:
    def test_defaults(self):
        c = SweepConfig()
        assert c.problem == "fisher" and c.L == 30 and c.h_list == [0.1]

    def test_default_grid(self):
        g = hs.default_lambda_grid()
        assert len(g) == 201
        assert g[0] == 1j and g[-1] == pytest.approx(1e8j)
        assert all(z.real == 0 for z in g)
        steps = np.diff(np.log10(np.abs(g)))
        assert np.allclose(steps, 1 / 25)

    @pytest.mark.parametrize("v, z", [("1e4j", 1e4j), ("3+4i", 3 + 4j), ([1, 2], 1 + 2j), (5, 5)])
    def test_parse_complex(self, v, z):
        assert hs.parse_complex(v) == z

    @pytest.mark.parametrize("v", ["abc", [1, 2, 3], None])
    def test_parse_complex_bad(self, v):
        with pytest.raises(ConfigError):
            hs.parse_complex(v)

    def test_unknown_field(self):
        with pytest.raises(ConfigError):
            SweepConfig.from_dict({"stepsize": 0.1})

    def test_unknown_method(self):
        with pytest.raises(ConfigError):
            SweepConfig.from_dict({"method": "rk4"})

    def test_json_round_trip(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"method": "gl4", "h_list": [0.2, 0.1], "lambda_list": ["1e3j", [0, 10]]}))
        c = SweepConfig.from_json(path)
        assert c.method.value == "gl4" and c.h_list == [0.2, 0.1] and c.lambda_list == [1e3j, 10j]

    def test_bad_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            SweepConfig.from_json(path)
        with pytest.raises(ConfigError):
            SweepConfig.from_json(tmp_path / "missing.json")


class TestValidate:
    def test_empty_lambda_list(self):
        with pytest.raises(ConfigError):
            hs.run_local_error_sweep(cfg(lambda_list=[], quantity="local"))

    def test_empty_h_list(self):
        with pytest.raises(ConfigError):
            hs.validate(cfg(lambda_list=["1e4j"], h_list=[]))

    @pytest.mark.parametrize("field, value", [("h_list", [-0.1]), ("expm_backend", "schur"),
                                              ("coords", "polar"), ("quantity", "total"),
                                              ("problem", "kdv"), ("points_per_decade", 0),
                                              ("workers", 0)])
    def test_bad_fields(self, field, value):
        with pytest.raises(ConfigError):
            hs.validate(cfg(lambda_list=["1e4j"], **{field: value}))

    def test_explicit_lambda_outside_region(self):
        with pytest.raises(ConfigError):
            hs.validate(cfg(lambda_list=["1j"]), "evans")

    def test_minus_side_only_for_local(self):
        assert hs.validate(cfg(lambda_list=["1j"]), "local") == [1j]

    def test_default_grid_drops_outside_points(self):
        kept = hs.validate(cfg(lambda_decades=(0, 1), points_per_decade=4), "evans")
        assert 1j not in kept and len(kept) >= 1
        assert kept == [z for z in hs.default_lambda_grid((0, 1), 4) if z != 1j][-len(kept):]


class TestCsv:
    def test_header_exact(self):
        rows = hs.run_evans_sweep(cfg(lambda_list=["1e3j"]))
        text = hs.rows_to_csv(rows)
        assert text.splitlines()[0] == HEADER

    def test_rows_echo_config(self):
        rows = hs.run_evans_sweep(cfg(lambda_list=["1e3j", "2+50j"], h_list=[0.2, 0.1], method="gl4"))
        recs = parse(hs.rows_to_csv(rows))
        assert [(float(r["lambda_re"]), float(r["lambda_im"]), float(r["h"])) for r in recs] == [
            (0, 1e3, 0.2), (0, 1e3, 0.1), (2, 50, 0.2), (2, 50, 0.1)]
        assert {r["method"] for r in recs} == {"gl4"} and {r["quantity"] for r in recs} == {"evans"}

    def test_floats_round_trip(self):
        rows = hs.run_evans_sweep(cfg(lambda_list=["1e3j"]))
        rec = parse(hs.rows_to_csv(rows))[0]
        assert float(rec["measured_abs"]) == rows[0].measured_abs

    def test_write_to_file(self, tmp_path):
        out = tmp_path / "sub" / "e.csv"
        rows = hs.run_evans_sweep(cfg(lambda_list=["1e3j"], output_path=str(out)))
        assert out.read_text() == hs.rows_to_csv(rows)

    def test_determinism_across_workers(self):
        lams = ["1e2j", "1e3j", "1e4j", "1e5j"]
        a = hs.rows_to_csv(hs.run_expm_comparison(cfg(lambda_list=lams, workers=1)))
        b = hs.rows_to_csv(hs.run_expm_comparison(cfg(lambda_list=lams, workers=3)))
        c = hs.rows_to_csv(hs.run_expm_comparison(cfg(lambda_list=lams, workers=3)))
        assert a == b == c

    def test_failed_rows_get_error_column(self, monkeypatch):
        real = hs.evans_fn

        def flaky(p, lam, *a, **kw):
            if lam == 1e4j:
                raise FloatingPointError("boom")
            return real(p, lam, *a, **kw)

        monkeypatch.setattr(hs, "evans_fn", flaky)
        rows = hs.run_evans_sweep(cfg(lambda_list=["1e3j", "1e4j", "1e5j"]))
        recs = parse(hs.rows_to_csv(rows))
        assert list(recs[0]) == HEADER.split(",") + ["error"]
        assert [r["error"] for r in recs] == ["", "FloatingPointError: boom", ""]
        assert recs[1]["measured_abs"] == "nan" and math.isfinite(float(recs[2]["measured_abs"]))

    def test_no_error_column_when_clean(self):
        text = hs.rows_to_csv(hs.run_evans_sweep(cfg(lambda_list=["1e3j"])))
        assert "error" not in text.splitlines()[0]


class TestLocalSweep:
    def test_stiff_component_h_squared(self):
        rows = hs.run_local_error_sweep(cfg(lambda_list=["1e4j"], h_list=[0.2, 0.1], quantity="local"))
        assert rows[0].comp2_abs / rows[1].comp2_abs == pytest.approx(4, rel=0.15)

    @pytest.mark.parametrize("p", [4, 5, 6])
    def test_tracks_estimate_in_stiff_regime(self, p):
        # The full range p = 2..6 is an acceptance criterion.
        r = hs.run_local_error_sweep(cfg(lambda_list=[1j * 10.0**p], h_list=[0.2], quantity="local"))[0]
        assert 1 / 1.5 <= r.ratio <= 1.5

    def test_raw_coords_agree(self):
        t = hs.run_local_error_sweep(cfg(lambda_list=["1e3j"], quantity="local"))[0]
        r = hs.run_local_error_sweep(cfg(lambda_list=["1e3j"], quantity="local", coords="raw"))[0]
        assert r.measured_abs == pytest.approx(t.measured_abs, rel=1e-3)


class TestGlobalSweep:
    def test_stiff_component_against_closed_form(self, fisher):
        lam = 1e4j
        r = hs.run_global_error_sweep(cfg(lambda_list=[lam], quantity="global"))[0]
        k = spectral_context(fisher, lam).kappa
        closed = abs(ea.fisher_global_estimate(-1.0, 0.1, k).component2)
        assert 1 / 1.5 <= r.comp2_abs / closed <= 1.5

    @pytest.mark.parametrize("p", [3, 4, 5])
    def test_global_equals_local_when_stiff(self, p):
        lam = [1j * 10.0**p]
        g = hs.run_global_error_sweep(cfg(lambda_list=lam, quantity="global"))[0]
        loc = hs.run_local_error_sweep(cfg(lambda_list=lam, quantity="local"))[0]
        assert 0.5 <= g.measured_abs / loc.measured_abs <= 2

    def test_expmid_has_no_estimate(self):
        r = hs.run_global_error_sweep(cfg(lambda_list=["1e3j"], quantity="global", method="expmid"))[0]
        assert math.isnan(r.estimated_abs) and math.isnan(r.ratio) and r.measured_abs > 0


class TestEvansSweep:
    @pytest.mark.parametrize("p", [2, 4, 6])
    def test_magnus4_plateau(self, p):
        r = hs.run_evans_sweep(cfg(lambda_list=[1j * 10.0**p]))[0]
        assert r.measured_abs == pytest.approx(2.268e-7, rel=0.35)
        assert r.estimated_abs == pytest.approx(2.268e-7, rel=1e-3)
        assert r.comp1_abs == pytest.approx(ea.roundoff_model(1j * 10.0**p))

    @pytest.mark.parametrize("p", [3, 4])
    def test_expmid_beats_magnus4(self, p):
        lam = [1j * 10.0**p]
        mid = hs.run_evans_sweep(cfg(lambda_list=lam, method="expmid"))[0]
        mag = hs.run_evans_sweep(cfg(lambda_list=lam))[0]
        assert mid.measured_abs <= mag.measured_abs

    def test_gl4_model_column(self):
        r = hs.run_evans_sweep(cfg(lambda_list=["1e3j"], method="gl4"))[0]
        assert r.estimated_abs == pytest.approx(1e-10)
        assert r.measured_abs <= 10 * r.estimated_abs


class TestExpmComparison:
    def test_paired_rows(self):
        rows = hs.run_expm_comparison(cfg(lambda_list=["1e2j", "1e3j"], h_list=[0.2, 0.1]))
        assert [(r.lambda_im, r.h, r.backend) for r in rows] == [
            (100, 0.2, "eig"), (100, 0.2, "pade"), (100, 0.1, "eig"), (100, 0.1, "pade"),
            (1000, 0.2, "eig"), (1000, 0.2, "pade"), (1000, 0.1, "eig"), (1000, 0.1, "pade")]
        assert {r.method for r in rows} == {"magnus4"}

    def test_backends_agree_when_well_conditioned(self):
        rows = hs.run_expm_comparison(cfg(lambda_list=["10j", "1e2j", "1e3j"]))
        for eig, pade in zip(rows[::2], rows[1::2]):
            assert abs(eig.measured_abs - pade.measured_abs) <= 1e-8 * eig.comp2_abs

    def test_pade_breaks_down_first(self):
        rows = hs.run_expm_comparison(cfg(lambda_list=[1j * 10.0**p for p in (5, 5.5, 6)]))
        ratios = [pade.measured_abs / eig.measured_abs for eig, pade in zip(rows[::2], rows[1::2])]
        assert max(ratios) >= 10


class TestOrderStudy:
    def test_needs_halving_chain(self):
        with pytest.raises(ConfigError):
            hs.run_order_study(cfg(lambda_list=["1e4j"], h_list=[0.1]))
        with pytest.raises(ConfigError):
            hs.run_order_study(cfg(lambda_list=["1e4j"], h_list=[0.2, 0.15]))

    def test_nonstiff_global_order_four(self):
        rows = hs.run_order_study(cfg(lambda_list=["1j"], h_list=[0.2, 0.1, 0.05], quantity="global"))
        assert [r.quantity for r in rows] == ["order_global"] * 2
        assert all(r.measured_abs == pytest.approx(4, abs=0.3) for r in rows)
        assert all(r.estimated_abs == 4 for r in rows)

    def test_stiff_global_order_reduction(self):
        rows = hs.run_order_study(cfg(lambda_list=["1e4j"], h_list=[0.2, 0.1, 0.05], quantity="global"))
        assert all(r.measured_abs == pytest.approx(2, abs=0.4) for r in rows)

    @pytest.mark.parametrize("lam", ["10j", "1e4j"])
    def test_evans_order_four(self, lam):
        # lambda = i sits outside the admissible region, so the nonstiff case uses 10i.
        rows = hs.run_order_study(cfg(lambda_list=[lam], h_list=[0.2, 0.1, 0.05], quantity="evans"))
        assert all(r.measured_abs == pytest.approx(4, abs=0.3) for r in rows)

    def test_expmid_nominal(self):
        rows = hs.run_order_study(cfg(lambda_list=["1j"], h_list=[0.2, 0.1], quantity="global", method="expmid"))
        assert rows[0].estimated_abs == 2
        assert rows[0].measured_abs == pytest.approx(2, abs=0.3)
