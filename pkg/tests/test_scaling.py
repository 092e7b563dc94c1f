import csv
import io
import math

import numpy as np
import pytest

from uqsim import channel as ch
from uqsim import qmath
from uqsim import scaling as sc
from uqsim.channel import SwitchSpec
from uqsim.errors import BracketError, InvalidArgumentError

IDEAL = SwitchSpec()


def pdl_fidelity(pdl_db):
    # |00> - r|11> normalized, r = eta_PDL (J_loss acts twice).
    r = 10 ** (-pdl_db / 10)
    return (1 + r) ** 2 / (2 * (1 + r * r))


def per_fidelity(per_db):
    # Two leak passes map |Phi-> to |00> - |11> + s(|10> - |01>), s = 2 eps sqrt(1 - eps^2).
    eps = 10 ** (-per_db / 20)
    s = 2 * eps * math.sqrt(1 - eps * eps)
    return 1 / (1 + s * s)


def pdl_threshold(f):
    # Smaller root of (2F - 1) r^2 - 2 r + (2F - 1) = 0.
    k = 2 * f - 1
    r = (1 - math.sqrt(1 - k * k)) / k
    return -10 * math.log10(r)


def per_threshold(f):
    # s = sin(2a) with eps = sin(a).
    s = math.sqrt(1 / f - 1)
    eps = math.sin(math.asin(s) / 2)
    return -20 * math.log10(eps)


class TestInsertionLoss:
    def test_coupler_floor(self):
        assert sc.insertion_loss(sc.LossBudget(waveguide_loss_db_per_cm=0.0)) == pytest.approx(3.74, abs=1e-12)

    def test_default_calibration_exceeds_8db(self):
        assert sc.insertion_loss(sc.LossBudget(dimension_n=1024)) > 8.0

    def test_single_stage(self):
        b = sc.LossBudget(coupler_loss_db_per_facet=0, stage_length_cm=1.0, waveguide_loss_db_per_cm=0.2,
                          dimension_n=2)
        assert sc.insertion_loss(b) == pytest.approx(0.2)

    def test_additive_in_stage_count(self):
        b = sc.LossBudget(dimension_n=64)
        floor = sc.insertion_loss(b.replace(waveguide_loss_db_per_cm=0.0))
        wave = sc.insertion_loss(b) - floor
        doubled = b.replace(stage_length_cm=2 * b.stage_length_cm)
        assert sc.insertion_loss(doubled) == pytest.approx(floor + 2 * wave, abs=1e-12)

    def test_invalid(self):
        with pytest.raises(InvalidArgumentError):
            sc.LossBudget(stage_length_cm=-1)
        with pytest.raises(InvalidArgumentError):
            sc.LossBudget(dimension_n=12)


class TestSweep:
    def test_single_point_ideal(self):
        rec = sc.run_sweep(sc.SweepRequest(IDEAL, ("pdl_db", (0.0,))))
        assert rec[0]["fidelity"] == pytest.approx(1.0, abs=1e-12)

    def test_pdl_axis_decreasing(self):
        rec = sc.run_sweep(sc.SweepRequest(IDEAL, ("pdl_db", (0.0, 0.64, 3.5))))
        f = [r["fidelity"] for r in rec]
        assert f[0] > f[1] > f[2]
        for r in rec:
            assert r["fidelity"] == pytest.approx(pdl_fidelity(r["pdl_db"]), abs=1e-12)

    def test_per_er_grid_increasing_along_both_axes(self):
        pers = (18.0, 22.0, 26.0, 30.0)
        ers = (15.0, 20.0, 25.0, 30.0)
        rec = sc.run_sweep(sc.SweepRequest(IDEAL.replace(dimension_n=16), ("per_db", pers), ("er_mzi_db", ers)))
        assert len(rec) == 16
        grid = np.array([r["fidelity"] for r in rec]).reshape(len(pers), len(ers))
        assert np.all(np.diff(grid, axis=0) > 0)
        assert np.all(np.diff(grid, axis=1) > 0)
        assert [(r["per_db"], r["er_mzi_db"]) for r in rec[:2]] == [(18.0, 15.0), (18.0, 20.0)]

    def test_unknown_parameter(self):
        with pytest.raises(InvalidArgumentError):
            sc.SweepRequest(IDEAL, ("not_a_field", (1.0,)))

    def test_unsorted_or_empty(self):
        with pytest.raises(InvalidArgumentError):
            sc.SweepRequest(IDEAL, ("pdl_db", (1.0, 0.5)))
        with pytest.raises(InvalidArgumentError):
            sc.SweepRequest(IDEAL, ("pdl_db", ()))

    def test_unknown_metric(self):
        with pytest.raises(InvalidArgumentError):
            sc.SweepRequest(IDEAL, ("pdl_db", (0.0,)), metrics=("fidelity", "entropy"))

    def test_seed_policy(self):
        base = IDEAL.replace(phase_sigma_rad=0.3, mc_iterations=500, seed=1000)
        rec = sc.run_sweep(sc.SweepRequest(base, ("pdl_db", (0.0, 0.0, 0.0))))
        rho = qmath.outer_product(qmath.phi_minus())
        for k, r in enumerate(rec):
            direct = ch.monte_carlo_output(rho, base.replace(seed=1000 ^ k))
            assert r["fidelity"] == direct.fidelity
        assert len({r["fidelity"] for r in rec}) == 3

    def test_workers_do_not_change_results(self):
        base = IDEAL.replace(phase_sigma_rad=0.1, mc_iterations=2000, seed=4)
        req = sc.SweepRequest(base, ("per_db", (20.0, 25.0, 30.0)), ("pdl_db", (0.0, 1.0)))
        assert sc.run_sweep(req, workers=1) == sc.run_sweep(req, workers=4)

    def test_budget_axis(self):
        req = sc.SweepRequest(IDEAL, ("stage_length_cm", (1.0, 2.0)), metrics=("insertion_loss_db",),
                              budget=sc.LossBudget(dimension_n=8))
        rec = sc.run_sweep(req)
        assert rec[1]["insertion_loss_db"] - rec[0]["insertion_loss_db"] == pytest.approx(5 * 0.2)


class TestThreshold:
    def test_oracles_invert(self):
        assert pdl_fidelity(pdl_threshold(0.99)) == pytest.approx(0.99, abs=1e-12)
        assert per_fidelity(per_threshold(0.99)) == pytest.approx(0.99, abs=1e-12)

    def test_pdl_threshold_matches_closed_form(self):
        x = sc.find_threshold(IDEAL, "pdl_db", 0.99, (0.0, 5.0))
        assert x == pytest.approx(pdl_threshold(0.99), abs=1e-3)
        assert sc.model_fidelity(IDEAL.replace(pdl_db=x)) == pytest.approx(0.99, abs=1e-3)

    def test_per_threshold_matches_closed_form(self):
        x = sc.find_threshold(IDEAL, "per_db", 0.99, (10.0, 40.0))
        assert x == pytest.approx(per_threshold(0.99), abs=1e-3)
        assert sc.model_fidelity(IDEAL.replace(per_db_0=x, per_db_1=x)) == pytest.approx(0.99, abs=1e-3)

    def test_er_threshold_substitutes_back(self):
        spec = IDEAL.replace(dimension_n=1024)
        x = sc.find_threshold(spec, "er_mzi_db", 0.995, (20.0, 50.0))
        assert sc.model_fidelity(spec.replace(er_mzi_db=x)) == pytest.approx(0.995, abs=1e-3)

    def test_unreachable_target(self):
        with pytest.raises(BracketError):
            sc.find_threshold(IDEAL, "pdl_db", 1.0, (0.1, 5.0))

    def test_no_sign_change(self):
        with pytest.raises(BracketError):
            sc.find_threshold(IDEAL, "pdl_db", 0.5, (0.0, 1.0))

    def test_ignores_phase_noise(self):
        noisy = IDEAL.replace(phase_sigma_rad=0.5, mc_iterations=10)
        assert sc.find_threshold(noisy, "pdl_db", 0.99, (0, 5)) == sc.find_threshold(IDEAL, "pdl_db", 0.99, (0, 5))


class TestDimension:
    def test_er_only_closed_form(self):
        spec = IDEAL.replace(er_mzi_db=25.0)
        ns = [2**k for k in range(1, 11)]
        for r in sc.fidelity_vs_dimension(spec, ns):
            ps = (1 - 10 ** (-2.5)) ** ch.switch_depth(r["dimension_n"])
            assert r["fidelity"] == pytest.approx((1 + ps) / 2, abs=1e-9)

    def test_measured_er(self):
        rec = sc.fidelity_vs_dimension(IDEAL.replace(er_mzi_db=32.24), [2, 16, 1024])
        f = [r["fidelity"] for r in rec]
        assert f == sorted(f, reverse=True)
        assert f[-1] >= 0.994

    def test_projected_er(self):
        assert sc.fidelity_vs_dimension(IDEAL.replace(er_mzi_db=35.0), [1024])[0]["fidelity"] >= 0.997

    def test_qsc_noise_dimension_independent(self):
        spec = IDEAL.replace(per_db_0=23.25, per_db_1=24.79, pdl_db=3.5)
        f = [r["fidelity"] for r in sc.fidelity_vs_dimension(spec, [2, 8, 64, 1024])]
        assert max(f) - min(f) <= 1e-9

    def test_ideal_is_one(self):
        for r in sc.fidelity_vs_dimension(IDEAL, [2, 4, 1024]):
            assert r["fidelity"] == pytest.approx(1.0, abs=1e-12)

    def test_insertion_loss_column(self):
        rec = sc.fidelity_vs_dimension(IDEAL, [2, 1024])
        assert rec[0]["insertion_loss_db"] == pytest.approx(3.74 + 2.1 * 0.2)
        assert rec[1]["insertion_loss_db"] > 8


class TestCsv:
    def test_empty(self):
        assert sc.export_csv([], ["pdl_db", "fidelity"]) == "pdl_db,fidelity\n"

    def test_one_point(self):
        text = sc.export_csv([{"pdl_db": 0.5, "fidelity": 0.1 + 0.2}])
        assert text.splitlines() == ["pdl_db,fidelity", "0.5,0.30000000000000004"]

    def test_grid(self):
        req = sc.SweepRequest(IDEAL, ("per_db", (20.0, 25.0, 30.0)), ("pdl_db", (0.0, 0.5, 1.0)))
        text = sc.export_csv(sc.run_sweep(req), sc.sweep_columns(req))
        lines = text.splitlines()
        assert len(lines) == 10
        rows = list(csv.DictReader(io.StringIO(text)))
        assert float(rows[4]["fidelity"]) == sc.run_sweep(req)[4]["fidelity"]
