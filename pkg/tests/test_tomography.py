import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings

from uqsim import config as cfg
from uqsim import qmath
from uqsim import tomography as tomo
from uqsim.channel import monte_carlo_output
from uqsim.errors import InvalidArgumentError

from conftest import seeds


def oracle_probability(rho, s, i):
    # Independent evaluation <s i| rho |s i> from explicit kets.
    kets = {
        "H": [1, 0], "V": [0, 1],
        "D": [1 / math.sqrt(2), 1 / math.sqrt(2)], "A": [1 / math.sqrt(2), -1 / math.sqrt(2)],
        "R": [1 / math.sqrt(2), 1j / math.sqrt(2)], "L": [1 / math.sqrt(2), -1j / math.sqrt(2)],
    }
    bra = np.conj(np.kron(kets[s], kets[i]))
    return float(np.real(bra @ rho @ bra.conj()))


class TestProjectors:
    def test_examples(self):
        np.testing.assert_allclose(tomo.projector("H"), np.diag([1, 0]))
        np.testing.assert_allclose(tomo.projector("D"), 0.5 * np.array([[1, 1], [1, 1]]))
        np.testing.assert_allclose(tomo.projector("R"), 0.5 * np.array([[1, -1j], [1j, 1]]))

    def test_orthogonal_pairs_and_unbiased(self):
        for a, b in (("H", "V"), ("D", "A"), ("R", "L")):
            assert np.trace(tomo.projector(a) @ tomo.projector(b)) == pytest.approx(0)
        for a in "HV":
            for b in "DARL":
                assert np.trace(tomo.projector(a) @ tomo.projector(b)).real == pytest.approx(0.5)

    def test_rank_one_hermitian(self):
        for lab in tomo.LABELS:
            p = tomo.projector(lab)
            np.testing.assert_allclose(p @ p, p, atol=1e-15)
            np.testing.assert_allclose(p, p.conj().T)
            assert np.trace(p).real == pytest.approx(1)

    def test_unknown_label(self):
        with pytest.raises(InvalidArgumentError):
            tomo.projector("X")


class TestExpectedProbability:
    def test_phi_minus(self, phi_minus_rho):
        assert tomo.expected_probability(phi_minus_rho, "H", "H") == pytest.approx(0.5)
        assert tomo.expected_probability(phi_minus_rho, "H", "V") == pytest.approx(0.0, abs=1e-15)
        assert tomo.expected_probability(phi_minus_rho, "D", "D") == pytest.approx(0.0, abs=1e-15)
        assert tomo.expected_probability(phi_minus_rho, "D", "A") == pytest.approx(0.5)

    def test_matches_oracle(self, rng):
        rho = qmath.random_density(rng)
        for s, i in tomo.SETTINGS:
            assert tomo.expected_probability(rho, s, i) == pytest.approx(oracle_probability(rho, s, i), abs=1e-12)

    def test_each_basis_pair_sums_to_one(self, rng):
        rho = qmath.random_density(rng)
        for a in ("HV", "DA", "RL"):
            for b in ("HV", "DA", "RL"):
                total = sum(tomo.expected_probability(rho, s, i) for s in a for i in b)
                assert total == pytest.approx(1.0, abs=1e-12)


class TestSimulateCounts:
    def test_forbidden_setting_is_zero(self, phi_minus_rho):
        for seed in range(5):
            assert tomo.simulate_counts(phi_minus_rho, 10**6, seed).counts[("H", "V")] == 0

    def test_hh_within_five_sigma(self, phi_minus_rho):
        n = tomo.simulate_counts(phi_minus_rho, 10**6, 7).counts[("H", "H")]
        assert abs(n - 5e5) <= 5 * math.sqrt(5e5)

    def test_maximally_mixed(self):
        n = 10**6
        data = tomo.simulate_counts(np.eye(4) / 4, n, 3)
        for c in data.counts.values():
            assert abs(c - n / 4) <= 5 * math.sqrt(n / 4)

    def test_deterministic(self, phi_minus_rho):
        a = tomo.simulate_counts(phi_minus_rho, 1000, 11)
        b = tomo.simulate_counts(phi_minus_rho, 1000, 11)
        c = tomo.simulate_counts(phi_minus_rho, 1000, 12)
        assert a.counts == b.counts
        assert a.counts != c.counts

    def test_background(self, phi_minus_rho):
        data = tomo.simulate_counts(phi_minus_rho, 10, 0, background=1e6)
        assert data.counts[("H", "V")] > 0

    def test_invalid(self, phi_minus_rho):
        with pytest.raises(InvalidArgumentError):
            tomo.simulate_counts(phi_minus_rho, 0, 0)
        with pytest.raises(InvalidArgumentError):
            tomo.simulate_counts(phi_minus_rho, 10, 0, background=-1)


class TestDataset:
    def test_complete(self, phi_minus_rho):
        data = tomo.exact_dataset(phi_minus_rho)
        assert data.is_complete()
        assert len(data.vector()) == 36

    def test_missing_listed(self, phi_minus_rho):
        counts = dict(tomo.exact_dataset(phi_minus_rho).counts)
        del counts[("R", "L")]
        data = tomo.TomographyDataset(counts)
        assert data.missing_settings() == [("R", "L")]
        with pytest.raises(InvalidArgumentError, match="RL"):
            data.vector()

    def test_rejects_negative_and_bad_labels(self):
        with pytest.raises(InvalidArgumentError):
            tomo.TomographyDataset({("H", "H"): -1})
        with pytest.raises(InvalidArgumentError):
            tomo.TomographyDataset({("H", "Q"): 1})

    def test_csv_round_trip(self, phi_minus_rho):
        data = tomo.simulate_counts(phi_minus_rho, 500, 1)
        text = data.to_csv()
        assert text.splitlines()[0] == "signal_basis,idler_basis,count"
        assert tomo.TomographyDataset.from_csv(text).counts == data.counts

    def test_csv_errors(self):
        with pytest.raises(InvalidArgumentError):
            tomo.TomographyDataset.from_csv("a,b,c\nH,H,1\n")
        with pytest.raises(InvalidArgumentError):
            tomo.TomographyDataset.from_csv("signal_basis,idler_basis,count\nH,H,1\nH,H,2\n")
        with pytest.raises(InvalidArgumentError):
            tomo.TomographyDataset.from_csv("signal_basis,idler_basis,count\nH,H,many\n")


class TestLinearInversion:
    def test_design_rank(self):
        a = tomo.design_matrix()
        assert a.shape == (36, 16)
        assert np.linalg.matrix_rank(a) == 16

    def test_exact_data(self, rng):
        rho = qmath.random_density(rng)
        np.testing.assert_allclose(tomo.linear_inversion(tomo.exact_dataset(rho, 1000)), rho, atol=1e-10)

    def test_maximally_mixed(self):
        np.testing.assert_allclose(tomo.linear_inversion(tomo.exact_dataset(np.eye(4) / 4)), np.eye(4) / 4,
                                   atol=1e-12)

    def test_noisy_data_can_be_unphysical_and_is_clipped(self, phi_minus_rho):
        counts = dict(tomo.exact_dataset(phi_minus_rho, 1000).counts)
        counts[("H", "V")] += 30
        counts[("V", "H")] += 30
        est = tomo.linear_inversion(tomo.TomographyDataset(counts))
        assert np.linalg.eigvalsh(est).min() < -1e-3
        phys = tomo.project_to_physical(est)
        assert np.linalg.eigvalsh(phys).min() >= -1e-12
        assert np.trace(phys).real == pytest.approx(1.0, abs=1e-12)

    def test_all_zero(self):
        zero = tomo.TomographyDataset({s: 0 for s in tomo.SETTINGS})
        with pytest.raises(InvalidArgumentError):
            tomo.linear_inversion(zero)


class TestMle:
    def test_exact_phi_minus(self, phi_minus_rho):
        res = tomo.mle_reconstruct(tomo.exact_dataset(phi_minus_rho, 1e6))
        assert qmath.uhlmann_fidelity(res.rho, phi_minus_rho) >= 1 - 1e-6

    def test_werner_concurrence(self):
        rho = qmath.werner(0.8)
        res = tomo.mle_reconstruct(tomo.simulate_counts(rho, 10**6, 5))
        assert qmath.concurrence(res.rho) == pytest.approx(0.7, abs=0.01)

    def test_output_is_physical(self, phi_minus_rho):
        res = tomo.mle_reconstruct(tomo.simulate_counts(phi_minus_rho, 200, 2))
        assert qmath.hermiticity_error(res.rho) == 0
        assert np.linalg.eigvalsh(res.rho).min() >= -1e-12
        assert np.trace(res.rho).real == pytest.approx(1.0, abs=1e-12)

    def test_likelihood_non_decreasing(self):
        res = tomo.mle_reconstruct(tomo.simulate_counts(qmath.werner(0.6), 2000, 9))
        assert len(res.history) > 1
        assert np.all(np.diff(res.history) >= 0)

    def test_all_zero(self):
        with pytest.raises(InvalidArgumentError):
            tomo.mle_reconstruct(tomo.TomographyDataset({s: 0 for s in tomo.SETTINGS}))

    def test_incomplete(self, phi_minus_rho):
        counts = dict(tomo.exact_dataset(phi_minus_rho).counts)
        del counts[("H", "H")]
        with pytest.raises(InvalidArgumentError, match="HH"):
            tomo.mle_reconstruct(tomo.TomographyDataset(counts))

    def test_non_convergence_warns(self):
        data = tomo.simulate_counts(qmath.werner(0.5), 1000, 1)
        with pytest.warns(tomo.ConvergenceWarning):
            res = tomo.mle_reconstruct(data, max_iters=1, tol=0.0)
        assert not res.converged
        assert res.iterations == 1

    @settings(max_examples=15, deadline=None)
    @given(seeds)
    def test_exact_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        rho = qmath.random_density(rng, rank=int(rng.integers(1, 5)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", tomo.ConvergenceWarning)
            res = tomo.mle_reconstruct(tomo.exact_dataset(rho, 1e6))
        assert qmath.uhlmann_fidelity(rho, res.rho) >= 1 - 1e-6

    def test_error_shrinks_with_counts(self):
        rho = qmath.werner(0.9)
        errors = []
        for n in (10**3, 10**4, 10**5, 10**6):
            trials = []
            for seed in range(5):
                est = tomo.mle_reconstruct(tomo.simulate_counts(rho, n, seed)).rho
                trials.append(1 - qmath.uhlmann_fidelity(rho, est))
            errors.append(float(np.mean(trials)))
        assert all(a > b for a, b in zip(errors, errors[1:]))
        # Decade steps in n should cut the error by roughly sqrt(10) or more.
        ratio = errors[0] / errors[-1]
        assert ratio > 10 ** 1.5 * 0.5

    def test_channel_output_end_to_end(self):
        spec = cfg.switch_spec(cfg.resolve("table1-output1")).replace(mc_iterations=2000)
        out = monte_carlo_output(qmath.outer_product(qmath.phi_minus()), spec)
        with warnings.catch_warnings():
            # Near-pure states approach the boundary slowly; the best iterate is still returned.
            warnings.simplefilter("ignore", tomo.ConvergenceWarning)
            res = tomo.mle_reconstruct(tomo.simulate_counts(out.rho_out, 10**5, 17))
        assert qmath.fidelity_to_pure(res.rho, out.target) == pytest.approx(out.fidelity, abs=0.03)
        assert qmath.purity(res.rho) == pytest.approx(out.purity, abs=0.03)
