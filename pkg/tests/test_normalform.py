import json
from fractions import Fraction as F

import numpy as np
import pytest

from saddletrap import dynamics as dyn
from saddletrap import normalform as nf
from saddletrap import trigalg as ta

S, J, I2, SJ = nf.S, nf.J, nf.I2, nf.SJ


@pytest.fixture(scope="module")
def ledger():
    return nf.build_reduction()


@pytest.fixture(scope="module")
def checks(ledger):
    return nf.check_identities(ledger)


class TestReduction:
    def test_b_series(self, ledger):
        B = ledger.B
        assert B[1].is_zero()
        assert B[2] == ta.block([[0, S.scale(2)], [I2, 0]]).scale(F(-1, 4))
        assert B[3] == ta.block([[0, 0], [0, J]]).scale(F(1, 4))
        assert B[4] == ta.block([[0, 0], [S, 0]]).scale(F(-1, 16))

    def test_gauges(self, ledger):
        assert ledger.T1 == ta.block([[0, 0], [0, S]]).scale(F(-1, 2))
        assert ledger.T2 == ta.block([[0, SJ], [0, 0]]).scale(F(-1, 4))
        assert ledger.T4 == ta.block([[0, 0], [SJ, 0]]).scale(F(-1, 32))

    def test_homological_equations(self, ledger):
        A0 = ledger.A[0]
        assert A0.commutator(ledger.T2).is_zero()
        assert ledger.B[2] - ledger.T2.derivative() == ledger.B[2].average()
        assert ledger.T4.derivative() == ledger.B[4].fluctuation()
        assert ledger.B[2].average() == ta.block([[0, 0], [I2, 0]]).scale(F(-1, 4))

    def test_series_expansion_matches_formulas(self, ledger):
        expanded = nf.gauge_transform(list(ledger.A), ledger.T1, 2)
        assert list(expanded) == list(ledger.B)

    def test_averaged_generator_is_constant(self, ledger):
        assert all(m.is_constant() for m in ledger.M3[:4])

    def test_all_checks_pass(self, checks):
        assert nf.first_failure(checks) is None
        assert all(c.passed for c in checks if not c.informational)

    def test_sign_variants_flagged(self, checks):
        info = {c.name: c for c in checks if c.informational}
        assert len(info) == 2
        assert not any(c.passed for c in info.values())

    def test_anchor_text_is_descriptive(self, checks):
        for c in checks:
            assert c.anchor and c.anchor != c.name


class TestTamper:
    def test_flipped_t2(self, ledger):
        bad = nf.build_reduction({"T2": ledger.T2.scale(-1)})
        failure = nf.first_failure(nf.check_identities(bad))
        assert failure is not None and failure.name == "B₂ − T₂′ = avg(B₂)"

    def test_flipped_t1_fails_early(self, ledger):
        bad = nf.build_reduction({"T1": ledger.T1.scale(-1)})
        failure = nf.first_failure(nf.check_identities(bad))
        assert failure is not None
        assert failure.name.startswith("T₁")

    def test_report_names_failure(self, ledger):
        report = nf.verification_report({"T2": ledger.T2.scale(-1)}, obstruction_ks=())
        assert not report["passed"]
        assert report["first_failure"] == "B₂ − T₂′ = avg(B₂)"


class TestNumericViews:
    @pytest.mark.parametrize("eps", [0.1, 0.3])
    def test_averaged_generator(self, eps):
        M = nf.averaged_generator(eps)
        np.testing.assert_allclose(M[:2], [[0, 0, 1, 0], [0, 0, 0, 1]])
        np.testing.assert_allclose(M[2:, :2], -eps**2 / 4 * np.eye(2))
        np.testing.assert_allclose(M[2:, 2:], eps**3 / 4 * dyn.J)

    def test_averaged_generator_limit(self):
        np.testing.assert_allclose(nf.averaged_generator(1e-9)[2:], 0.0, atol=1e-17)

    def test_averaged_generator_matches_rhs(self):
        rng = np.random.default_rng(7)
        M = nf.averaged_generator(0.1)
        for s in rng.normal(size=(100, 4)):
            np.testing.assert_allclose(M @ s, dyn.rhs_averaged(s, 0.1), rtol=1e-13, atol=1e-17)

    def test_composed_transform(self):
        np.testing.assert_array_equal(nf.composed_transform(0.7, 0.0), np.eye(4))
        C = nf.composed_transform(0.0, 0.1)
        expected = -(0.1**3 / 4) * dyn.saddle_matrix(0.0) @ dyn.J
        np.testing.assert_allclose(C[:2, :2], np.eye(2))
        np.testing.assert_allclose(C[:2, 2:], expected, atol=1e-18)

    @pytest.mark.parametrize("tau", np.linspace(0, 3, 20))
    def test_exact_and_numeric_agree(self, ledger, tau):
        eps = 0.2
        numeric = np.eye(4) + eps**2 * _t1(tau) + eps**3 * _t2(tau)
        np.testing.assert_allclose(nf.composed_transform(tau, eps), numeric, atol=1e-15)
        prod = nf.inverse_composed_transform(tau, eps) @ numeric
        assert np.abs(prod - np.eye(4)).max() < 10 * eps**5

    @pytest.mark.parametrize("tau", np.random.default_rng(3).uniform(-4, 4, 20))
    def test_ledger_matrices_numeric(self, ledger, tau):
        Sn, Jn = dyn.saddle_matrix(tau), dyn.J
        Z, I = np.zeros((2, 2)), np.eye(2)
        expected = {
            "A1": np.block([[Z, Z], [Z, Sn @ Jn]]),
            "B2": -np.block([[Z, 2 * Sn], [I, Z]]) / 4,
            "B3": np.block([[Z, Z], [Z, Jn]]) / 4,
            "B4": -np.block([[Z, Z], [Sn, Z]]) / 16,
            "T1": -np.block([[Z, Z], [Z, Sn]]) / 2,
            "T2": -np.block([[Z, Sn @ Jn], [Z, Z]]) / 4,
            "T4": -np.block([[Z, Z], [Sn @ Jn, Z]]) / 32,
        }
        mats = ledger.matrices()
        for name, value in expected.items():
            np.testing.assert_allclose(mats[name].eval(tau), value, atol=1e-13, err_msg=name)

    def test_first_normal_form_generator_from_series(self, ledger):
        # the A-series is the first normal form generator in tau = t / eps
        for t in np.linspace(0, 1, 7):
            eps = 0.15
            expected = dyn.first_normal_form_generator(t, eps)
            A = sum(m.eval(t / eps) * eps**k for k, m in enumerate(ledger.A))
            np.testing.assert_allclose(A, expected, atol=1e-14)


def _t1(tau):
    out = np.zeros((4, 4))
    out[2:, 2:] = -dyn.saddle_matrix(tau) / 2
    return out


def _t2(tau):
    out = np.zeros((4, 4))
    out[:2, 2:] = -dyn.saddle_matrix(tau) @ dyn.J / 4
    return out


class TestObstruction:
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_infeasible(self, k):
        rep = nf.contact_obstruction(k, 4)
        assert not rep.feasible
        assert rep.rank_augmented == rep.rank_coefficients + 1
        assert rep.solution is None
        assert "rank" in rep.certificate

    @pytest.mark.parametrize("m", [1, 2, 6])
    def test_infeasible_other_harmonic_caps(self, m):
        assert not nf.contact_obstruction(2, m).feasible

    @pytest.mark.parametrize("k", [1, 2])
    def test_monotone_in_harmonic_cap(self, k):
        assert all(not nf.contact_obstruction(k, m).feasible for m in (1, 2, 3, 4))

    def test_problem_grows_with_harmonics(self):
        sizes = [nf.contact_obstruction(1, m).n_unknowns for m in (1, 2, 3, 4)]
        assert sizes == sorted(sizes) and len(set(sizes)) == 4

    def test_velocity_coupled_control(self):
        rep = nf.velocity_coupled_control(4)
        assert rep.feasible
        assert rep.solution.block(1, 1) == S.scale(F(-1, 2))

    @pytest.mark.parametrize("k, m", [(0, 4), (4, 4), (1, 0), (1, 9)])
    def test_out_of_range(self, k, m):
        with pytest.raises(ValueError):
            nf.contact_obstruction(k, m)

    def test_rank(self):
        rows = [[F(1), F(2)], [F(2), F(4)], [F(0), F(1, 3)]]
        assert nf.rank_q(rows) == 2
        assert nf.rank_q([[F(0), F(0)]]) == 0


class TestReport:
    def test_default_report(self):
        report = nf.verification_report()
        assert report["passed"] and report["first_failure"] is None
        data = json.loads(nf.report_json(report))
        assert {"identities", "obstructions", "control", "matrices"} <= set(data)
        assert [o["k"] for o in data["obstructions"]] == [1, 2]
        assert all(not o["feasible"] for o in data["obstructions"])
        assert data["matrices"]["T2"] == str(nf.build_reduction().T2)
