import numpy as np
import pytest

from ph_eq import matrix, sis
from ph_eq.box import ManifoldBox
from ph_eq.dynamics import (
    IntegratorConfig,
    Trajectory,
    annotate_invariance,
    detect_convergence,
    fit_decay_rate,
    integrate,
    monitor_invariance,
)
from ph_eq.errors import IntegrationError

X_STAR = np.array([0.4413, 0.2973])


class TestIntegrate:
    def test_exponential_decay_rk45(self):
        traj = integrate(lambda x: -x, [1.0], IntegratorConfig(T=1, atol=1e-10, rtol=1e-10))
        assert traj.final[0] == pytest.approx(np.exp(-1), abs=1e-8)
        assert traj.times[-1] == 1.0

    def test_exponential_decay_rk4(self):
        traj = integrate(lambda x: -x, [1.0], IntegratorConfig(T=1, method="rk4", step=1e-3))
        assert traj.final[0] == pytest.approx(np.exp(-1), abs=1e-12)
        assert len(traj) == 1001

    def test_zero_drift(self):
        for method in ("rk45", "rk4"):
            traj = integrate(lambda x: np.zeros_like(x), [0.3, 0.7], IntegratorConfig(T=5, method=method))
            np.testing.assert_array_equal(traj.states, np.tile([0.3, 0.7], (len(traj), 1)))

    def test_reference_sis(self, ref_net):
        traj = integrate(sis.vector_field(ref_net), [0.9, 0.9], IntegratorConfig(T=200))
        np.testing.assert_allclose(traj.final, X_STAR, atol=1e-3)

    def test_rk4_and_rk45_agree(self, ref_net, ref_ctrl):
        for ctrl in (None, ref_ctrl):
            f = sis.vector_field(ref_net, ctrl)
            a = integrate(f, [0.9, 0.9], IntegratorConfig(T=50, atol=1e-10, rtol=1e-10)).final
            b = integrate(f, [0.9, 0.9], IntegratorConfig(T=50, method="rk4", step=0.01)).final
            np.testing.assert_allclose(a, b, atol=1e-9)

    def test_deterministic(self, ref_net):
        f = sis.vector_field(ref_net)
        a = integrate(f, [0.2, 0.1], IntegratorConfig(T=30))
        b = integrate(f, [0.2, 0.1], IntegratorConfig(T=30))
        np.testing.assert_array_equal(a.times, b.times)
        np.testing.assert_array_equal(a.states, b.states)

    def test_output_stride(self):
        traj = integrate(lambda x: -x, [1.0], IntegratorConfig(T=1, method="rk4", step=0.1, output_stride=3))
        np.testing.assert_allclose(traj.times, [0, 0.3, 0.6, 0.9, 1.0])

    def test_times_increasing(self, ref_net):
        traj = integrate(sis.vector_field(ref_net), [0.5, 0.5], IntegratorConfig(T=10))
        assert np.all(np.diff(traj.times) > 0)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_blow_up(self):
        with pytest.raises(IntegrationError):
            integrate(lambda x: x**2, [1.0], IntegratorConfig(T=2))
        with pytest.raises(IntegrationError):
            integrate(lambda x: x**2, [1.0], IntegratorConfig(T=2, method="rk4", step=0.1))

    @pytest.mark.parametrize("kwargs", [
        dict(T=0), dict(method="euler"), dict(method="rk4", step=0), dict(atol=0), dict(output_stride=0),
    ])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            IntegratorConfig(**kwargs)

    def test_csv_rows(self):
        traj = Trajectory(np.array([0.0, 1.0]), np.array([[1.0, 2.0], [3.0, 4.0]]))
        header, rows = traj.to_csv_rows()
        assert header == ["t", "x_1", "x_2"]
        assert rows == [[0.0, 1.0, 2.0], [1.0, 3.0, 4.0]]


class TestDecayRate:
    def test_linear(self):
        traj = integrate(lambda x: -0.7 * x, [1.0, -2.0], IntegratorConfig(T=20, atol=1e-13, rtol=1e-12))
        assert fit_decay_rate(traj, [0.0, 0.0]) == pytest.approx(0.7, rel=1e-6)

    def test_sis_tail_matches_abscissa(self, ref_net):
        x_star = sis.solve_endemic(ref_net)
        f = sis.vector_field(ref_net)
        traj = integrate(f, [0.9, 0.9], IntegratorConfig(T=60, atol=1e-13, rtol=1e-12))
        tail = traj.times >= 20
        rate = fit_decay_rate(Trajectory(traj.times[tail], traj.states[tail]), x_star)
        expected = -matrix.spectral_abscissa(sis.jacobian(ref_net, x_star))
        assert rate == pytest.approx(expected, rel=1e-3)

    def test_at_target(self):
        traj = Trajectory(np.array([0.0, 1.0]), np.zeros((2, 2)))
        assert fit_decay_rate(traj, [0.0, 0.0]) is None


class TestConvergence:
    def test_converged_sis(self, ref_net):
        f = sis.vector_field(ref_net)
        traj = integrate(f, [0.9, 0.9], IntegratorConfig(T=200))
        limit = detect_convergence(traj, f)
        np.testing.assert_allclose(limit, sis.solve_endemic(ref_net), atol=1e-6)

    def test_zero_drift_returns_start(self):
        f = lambda x: np.zeros_like(x)
        traj = integrate(f, [0.4, 0.6], IntegratorConfig(T=1))
        np.testing.assert_array_equal(detect_convergence(traj, f), [0.4, 0.6])

    def test_not_settled(self, ref_net):
        f = sis.vector_field(ref_net)
        traj = integrate(f, [0.9, 0.9], IntegratorConfig(T=2))
        assert detect_convergence(traj, f) is None

    def test_empty(self):
        with pytest.raises(ValueError):
            detect_convergence(Trajectory(np.zeros(0), np.zeros((0, 2))), lambda x: x)


class TestInvariance:
    def test_sis_stays_in_cube(self, ref_net):
        traj = integrate(sis.vector_field(ref_net), [0.99, 0.01], IntegratorConfig(T=100))
        assert monitor_invariance(traj, ManifoldBox.cube(0, 1, 2), slack=1e-6)

    def test_leaves_box(self):
        traj = integrate(lambda x: np.ones_like(x), [0.5], IntegratorConfig(T=1))
        assert not monitor_invariance(traj, ManifoldBox([0], [1]))
        flags = annotate_invariance(traj, ManifoldBox([0], [1])).flags
        assert flags[0] and not flags[-1]

    def test_empty_is_vacuous(self):
        assert monitor_invariance(Trajectory(np.zeros(0), np.zeros((0, 1))), ManifoldBox([0], [1]))
