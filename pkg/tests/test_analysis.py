import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saddletrap import analysis as an
from saddletrap import dynamics as dyn


class TestSimulate:
    def test_aligned_step_for_periodic_frames(self):
        traj = an.simulate("inertial", 0.1, (1, 0, 0, 0), 2.0, 0.003)
        n = np.pi * 0.1 / traj.meta["dt"]
        assert n == pytest.approx(round(n), abs=1e-9)
        assert traj.meta["dt"] <= 0.003

    def test_autonomous_keeps_step(self):
        traj = an.simulate("averaged", 0.1, (1, 0, 0, 0), 2.0, 0.003)
        assert traj.meta["dt"] == 0.003

    def test_zero_state(self):
        traj = an.simulate("inertial", 0.1, np.zeros(4), 10.0)
        assert not traj.states.any()


class TestResidual:
    def test_residual_size(self):
        # leading residual term is (3/16) eps^4 S x with |x| <= 1 here
        eps = 0.1
        u = an.simulate("inertial", eps, (1, 0, 0, 0), 5.0)
        r = an.guiding_center_residual(u, eps)
        assert r.max() < 0.3 * eps**4

    def test_scan_slope(self):
        rep = an.residual_scan([0.2, 0.1, 0.05], horizon=20)
        assert 3.6 <= rep.fitted_slope <= 4.4
        assert rep.epsilons == [0.2, 0.1, 0.05]
        assert rep.max_residuals[0] == pytest.approx(3 / 16 * 0.2**4, rel=0.3)

    def test_order_independent(self):
        a = an.residual_scan([0.05, 0.2, 0.1], horizon=20)
        b = an.residual_scan([0.2, 0.1, 0.05], horizon=20)
        assert a.to_dict() == b.to_dict()

    def test_degenerate_initial_state(self):
        with pytest.raises(an.DegenerateInputError, match="degenerate initial state"):
            an.residual_scan([0.2, 0.1, 0.05], initial=(0, 0, 0, 0))

    @pytest.mark.parametrize("eps_list, horizon", [
        ([0.2, 0.2, 0.1], 50),
        ([0.6, 0.1, 0.05], 50),
        ([0.2, 0.1, 0.05], 10),
    ])
    def test_rejects(self, eps_list, horizon):
        with pytest.raises(ValueError):
            an.residual_scan(eps_list, horizon)


class TestFloquet:
    def test_stable(self):
        rep = an.floquet_stability(0.1)
        assert rep.stable
        np.testing.assert_allclose(np.abs(rep.multipliers), 1.0, atol=1e-6)
        assert rep.determinant == pytest.approx(1.0, abs=1e-10)

    def test_unstable(self):
        rep = an.floquet_stability(1.5)
        assert not rep.stable and rep.max_modulus > 1.001

    def test_symplectic_pairs(self):
        # multipliers of a Hamiltonian monodromy come in (m, 1/m) pairs
        mods = np.sort(np.abs(an.floquet_stability(1.3).multipliers))
        assert mods[0] * mods[-1] == pytest.approx(1.0, rel=1e-8)

    def test_sweep_threshold(self):
        res = an.stability_sweep(0.9, 1.1, n=16)
        assert res.eps_critical == pytest.approx(1.0, abs=1e-3)
        assert res.stable[0] and not res.stable[-1]

    def test_sweep_without_transition(self):
        with pytest.raises(an.NoTransitionError):
            an.stability_sweep(0.05, 0.2, n=16)

    @pytest.mark.parametrize("lo, hi, n", [(0.5, 0.4, 16), (0.0, 1.0, 16), (0.5, 1.5, 8)])
    def test_sweep_rejects(self, lo, hi, n):
        with pytest.raises(ValueError):
            an.stability_sweep(lo, hi, n)


class TestPrecession:
    def test_fit_recovers_frequencies(self):
        t = np.linspace(0, 50, 600)
        z = 0.7 * np.exp(0.31j * t) + (0.2 - 0.1j) * np.exp(-0.29j * t)
        fit = an.fit_two_frequencies(t, z)
        assert fit.nu_plus == pytest.approx(0.31, abs=1e-10)
        assert fit.nu_minus == pytest.approx(-0.29, abs=1e-10)
        assert fit.c_minus == pytest.approx(0.2 - 0.1j, abs=1e-9)

    def test_fit_too_short(self):
        with pytest.raises(an.FitError):
            an.fit_two_frequencies(np.arange(4.0), np.ones(4))

    @pytest.mark.parametrize("eps", [0.1, 0.2])
    def test_averaged_frequencies_are_roots(self, eps):
        for nu in an.averaged_frequencies(eps):
            assert nu**2 - eps**3 / 4 * nu - eps**2 / 4 == pytest.approx(0.0, abs=1e-16)
        assert sum(an.averaged_frequencies(eps)) / 2 == pytest.approx(eps**3 / 8)

    @pytest.mark.parametrize("eps", [0.1, 0.2])
    def test_fitted_slow_frequencies(self, eps):
        rep = an.precession_rate(eps, "averaged")
        nu_p, nu_m = an.averaged_frequencies(eps)
        assert rep.nu_plus == pytest.approx(nu_p, rel=5e-3)
        assert rep.nu_minus == pytest.approx(nu_m, rel=5e-3)

    def test_averaged_rate(self):
        rep = an.precession_rate(0.2, "averaged")
        assert rep.relative_error < 1e-6 and rep.sign == "prograde"

    def test_naive_rate(self):
        rep = an.precession_rate(0.2, "naive")
        assert rep.sign == "retrograde"
        assert -rep.measured_rate == pytest.approx(rep.predicted_rate, rel=1e-6)

    def test_full_rate(self):
        rep = an.precession_rate(0.25, "full")
        assert rep.relative_error < 0.15 and rep.sign == "prograde"

    def test_apsidal_estimator_agrees(self):
        eps = 0.2
        t, u = an.guiding_center_signal(eps, "averaged", an.precession_horizon(eps, 2.0),
                                        initial=(1.0, 0.0, 0.0, 0.02))
        assert an.apsidal_rate(t, u) == pytest.approx(eps**3 / 8, rel=0.05)

    def test_naive_vs_true(self):
        cmp = an.naive_vs_true(0.1)
        assert cmp["opposite_sign"]
        assert cmp["magnitude_ratio"] == pytest.approx(1.0, abs=0.02)

    @pytest.mark.parametrize("kwargs", [
        dict(eps=0.1, frame="rotating"),
        dict(eps=0.5, frame="averaged"),
        dict(eps=0.1, frame="averaged", horizon=10.0),
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            an.precession_rate(**kwargs)


class TestForceIdentities:
    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.01, 0.9), st.floats(-3, 3), st.floats(-3, 3))
    def test_constancy(self, eps, a, b):
        assert an.constancy_check(eps, (a, b)) <= 1e-12 * max(1.0, abs(a) + abs(b))

    def test_constancy_control(self):
        assert an.constancy_check(0.1, (1.0, 0.0), co_rotating=False) > 0.5
        assert an.constancy_check(0.1, (0.0, 0.0)) == 0.0

    @pytest.mark.parametrize("x0", [(1.0, 0.0), (0.3, -2.0), (0.0, 0.0)])
    def test_mean_force(self, x0):
        mean, predicted = an.mean_force_check(x0, 0.1)
        np.testing.assert_allclose(mean, predicted, atol=1e-10)
        np.testing.assert_allclose(predicted, -0.1**2 / 4 * np.array(x0))

    def test_unshifted_mean_force_vanishes(self):
        mean, _ = an.mean_force_check((1.0, 0.0), 0.1, shifted=False)
        np.testing.assert_allclose(mean, 0.0, atol=1e-15)


class TestComparisons:
    @pytest.mark.parametrize("eps", [0.1, 0.05])
    def test_averaged_vs_direct(self, eps):
        gap = an.averaged_vs_direct(eps, 4 * np.pi / eps)
        assert gap < 0.1 * eps**2

    def test_averaged_vs_direct_zero(self):
        assert an.averaged_vs_direct(0.1, 20.0, initial=(0, 0, 0, 0)) == 0.0

    @pytest.mark.parametrize("eps", [0.05, 0.1, 0.2])
    def test_frame_equivalence(self, eps):
        rep = an.frame_equivalence(eps, 20.0)
        assert rep.gap <= 10 * rep.convergence

    def test_frame_equivalence_sensitive(self):
        # a wrong Coriolis sign in the map would not survive
        eps = 0.1
        s0 = np.array([1.0, 0.0, 0.0, 0.3])
        r0 = dyn.inertial_to_rotating(s0, 0.0, 1 / eps)
        a = an.simulate("inertial", eps, s0, 5.0, eps / 20, sample_every=1)
        r = an.simulate("rotating", eps, r0, 5.0, a.meta["dt"], sample_every=1)
        wrong = dyn.rotating_to_inertial(r.states, r.times, -1 / eps)
        assert np.abs(a.states - wrong).max() > 0.1

    def test_derivative_orders(self):
        errs = an.derivative_fd_errors(0.1)
        orders = np.log2(errs[:-1] / errs[1:])
        assert np.all((orders > 1.8) & (orders < 2.2))
