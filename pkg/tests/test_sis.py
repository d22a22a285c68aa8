import numpy as np
import pytest
from hypothesis import given, strategies as st

from ph_eq import matrix, sis
from ph_eq.acceptance import (
    fd_jacobian,
    jacobian_rel_error,
    random_control,
    random_endemic_network,
    random_healthy_network,
)
from ph_eq.box import ManifoldBox
from ph_eq.dynamics import IntegratorConfig, integrate, monitor_invariance
from ph_eq.errors import ConvergenceError, DomainError, PreconditionError

X_STAR = np.array([0.4413, 0.2973])
X_BAR = np.array([0.15, 0.1142])

seeds = st.integers(0, 2**32 - 1)


def instance(seed, healthy=False):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    net = random_healthy_network(rng, n) if healthy else random_endemic_network(rng, n)
    return net, random_control(rng, n), rng


class TestNetwork:
    def test_rejects_disconnected(self):
        with pytest.raises(ValueError, match="strongly connected"):
            sis.SISNetwork([1, 1], [[0, 1], [0, 0]])

    def test_rejects_zero_recovery(self):
        with pytest.raises(ValueError):
            sis.SISNetwork([0, 1], [[0, 1], [1, 0]])

    def test_rejects_negative_infection(self):
        with pytest.raises(ValueError):
            sis.SISNetwork([1, 1], [[0, -1], [1, 0]])

    def test_rejects_single_node(self):
        with pytest.raises(ValueError):
            sis.SISNetwork([1], [[1]])

    def test_parameters_immutable(self, ref_net):
        with pytest.raises(ValueError):
            ref_net.d[0] = 1.0


class TestControls:
    def test_power_slope_times_x_closed_form(self):
        h = sis.PowerControl(0.5, 0.5)
        assert h.slope_times_x(0.0) == 0.0
        assert h.slope_times_x(0.25) == pytest.approx(0.5 * 0.5 * 0.5)

    @pytest.mark.parametrize("ctrl", [
        sis.LinearControl(0.9), sis.PowerControl(0.5, 0.5),
        sis.PowerControl(1.0, 2.0), sis.SaturatingControl(0.7, 0.3), sis.ZeroControl(),
    ])
    def test_invariants(self, ctrl):
        xs = np.linspace(0, 1, 201)
        h = ctrl.value(xs)
        assert h[0] == 0.0
        assert np.all(np.diff(h) >= 0)
        # derivative times x matches a difference quotient
        x = np.linspace(0.05, 0.95, 19)
        fd = (ctrl.value(x + 1e-7) - ctrl.value(x - 1e-7)) / 2e-7
        np.testing.assert_allclose(ctrl.slope_times_x(x), fd * x, rtol=1e-5, atol=1e-9)

    @pytest.mark.parametrize("bad", [
        lambda: sis.LinearControl(-1), lambda: sis.PowerControl(1, 0),
        lambda: sis.PowerControl(1, 2.5), lambda: sis.SaturatingControl(1, 0),
    ])
    def test_parameter_ranges(self, bad):
        with pytest.raises(ValueError):
            bad()

    def test_dict_round_trip(self, ref_ctrl):
        assert sis.ControlSpec.from_dicts(ref_ctrl.to_dicts()) == ref_ctrl

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            sis.control_from_dict({"kind": "cubic"})


class TestDrift:
    def test_zero_state(self, ref_net, ref_ctrl):
        np.testing.assert_array_equal(sis.drift(ref_net, np.zeros(2)), 0.0)
        np.testing.assert_array_equal(sis.drift(ref_net, np.zeros(2), ref_ctrl), 0.0)

    def test_ref_rounded_equilibrium(self, ref_net):
        # hand evaluation at the 4-d.p. point
        x1, x2 = X_STAR
        expected = [-0.3 * x1 + (1 - x1) * (0.2 * x1 + 0.5 * x2),
                    -0.8 * x2 + (1 - x2) * (0.7 * x1 + 0.1 * x2)]
        np.testing.assert_allclose(sis.drift(ref_net, X_STAR), expected, atol=1e-15)
        np.testing.assert_allclose(expected, [-2.8383e-5, 1.22328e-4], atol=1e-9)

    def test_ref_rounded_controlled(self, ref_net, ref_ctrl):
        np.testing.assert_allclose(sis.drift(ref_net, X_BAR, ref_ctrl), 0.0, atol=2e-4)

    def test_domain(self, ref_net):
        with pytest.raises(DomainError):
            sis.drift(ref_net, [1.1, 0.5])
        with pytest.raises(DomainError):
            sis.drift(ref_net, [-1e-6, 0.5])
        sis.drift(ref_net, [-1e-10, 1 + 1e-10])

    def test_batch(self, ref_net, ref_ctrl, rng):
        pts = rng.uniform(0, 1, (7, 2))
        batch = sis.drift(ref_net, pts, ref_ctrl)
        for p, f in zip(pts, batch):
            np.testing.assert_allclose(sis.drift(ref_net, p, ref_ctrl), f)


class TestJacobian:
    def test_at_zero(self, ref_net):
        np.testing.assert_allclose(sis.jacobian(ref_net, np.zeros(2)), ref_net.linearization())

    def test_healthy_state_unstable(self, ref_net):
        assert matrix.is_hurwitz(sis.jacobian(ref_net, np.zeros(2))).verdict is False

    def test_hurwitz_at_endemic(self, ref_net):
        x = sis.solve_endemic(ref_net)
        assert matrix.is_hurwitz(sis.jacobian(ref_net, x)).verdict is True

    def test_power_control_at_zero_is_finite(self, ref_net, ref_ctrl):
        J = sis.jacobian(ref_net, np.zeros(2), ref_ctrl)
        np.testing.assert_allclose(J, ref_net.linearization())

    @given(seeds)
    def test_finite_differences(self, seed):
        net, ctrl, rng = instance(seed)
        for x in rng.uniform(0.02, 0.98, (50, net.n)):
            for c in (None, ctrl):
                J = sis.jacobian(net, x, c)
                J_fd = fd_jacobian(lambda y: sis.drift(net, y, c), x)
                assert jacobian_rel_error(J, J_fd) <= 1e-5


class TestThreshold:
    def test_ref(self, ref_net):
        assert sis.epidemic_threshold(ref_net) == pytest.approx(0.2633, abs=1e-4)

    def test_weak_ring(self):
        eps = 1e-3
        net = sis.SISNetwork([1, 1], [[0, eps], [eps, 0]])
        assert sis.epidemic_threshold(net) == pytest.approx(-1 + eps)

    def test_strong_recovery(self, ref_net):
        net = sis.SISNetwork(10 * ref_net.d, ref_net.b)
        assert sis.epidemic_threshold(net) < 0


class TestEndemic:
    def test_ref(self, ref_net):
        x = sis.solve_endemic(ref_net)
        np.testing.assert_allclose(x, X_STAR, atol=5e-4)
        assert np.max(np.abs(sis.drift(ref_net, x))) < 1e-12

    def test_ref_controlled(self, ref_net, ref_ctrl):
        x = sis.solve_endemic(ref_net, ref_ctrl)
        np.testing.assert_allclose(x, X_BAR, atol=5e-4)

    def test_below_threshold(self):
        net = sis.SISNetwork([1.001, 1.001], [[0, 1e-3], [1e-3, 0]])
        assert sis.solve_endemic(net) is None

    def test_below_threshold_grid_has_only_zero(self):
        # brute-force scan: |drift| on a grid vanishes only at the origin
        net = sis.SISNetwork([1.0, 1.0], [[0, 0.5], [0.5, 0]])
        g = np.linspace(0, 1, 201)
        pts = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
        norms = np.max(np.abs(sis.drift(net, pts)), axis=1)
        assert np.all(norms[np.any(pts > 0, axis=1)] > 0)

    def test_bad_tol(self, ref_net):
        with pytest.raises(ValueError):
            sis.solve_endemic(ref_net, tol=0)

    @given(seeds)
    def test_residual_and_interior(self, seed):
        net, ctrl, _ = instance(seed)
        for c in (None, ctrl):
            x = sis.solve_endemic(net, c, tol=1e-11)
            assert np.max(np.abs(sis.drift(net, x, c))) < 1e-11
            assert np.all((x > 0) & (x < 1))

    @given(seeds)
    def test_none_below_threshold(self, seed):
        net, ctrl, _ = instance(seed, healthy=True)
        assert sis.solve_endemic(net) is None
        assert sis.solve_endemic(net, ctrl) is None


class TestInvariantBox:
    def test_ref_box(self, ref_net):
        box, eps = sis.build_invariant_box(ref_net)
        y = matrix.perron_pair(ref_net.linearization()).vector
        np.testing.assert_allclose(box.lower, eps * y)
        np.testing.assert_allclose(box.upper, 1.0)
        assert sis.verify_inward_pointing(ref_net, box).passed
        assert box.contains(sis.solve_endemic(ref_net))

    def test_symmetric_network(self):
        net = sis.SISNetwork([0.1, 0.1], [[0, 1], [1, 0]])
        box, eps = sis.build_invariant_box(net)
        np.testing.assert_allclose(box.lower, [eps, eps])

    def test_controlled_box(self, ref_net, ref_ctrl):
        box, _ = sis.build_invariant_box(ref_net, ref_ctrl)
        assert sis.verify_inward_pointing(ref_net, box, ref_ctrl).passed
        assert box.contains(sis.solve_endemic(ref_net, ref_ctrl))

    def test_upper_faces_always_inward(self, ref_net):
        rep = sis.verify_inward_pointing(ref_net, ManifoldBox([0.9, 0.9], [1, 1]))
        upper = [f for f in rep.faces if f.side == "upper"]
        assert all(f.worst_margin > 0 for f in upper)

    def test_box_excluding_equilibrium_fails(self, ref_net):
        rep = sis.verify_inward_pointing(ref_net, ManifoldBox([0.9, 0.9], [1, 1]))
        assert not rep.passed
        assert any(f.side == "lower" and f.worst_margin < 0 for f in rep.faces)

    def test_below_threshold_rejected(self):
        net = sis.SISNetwork([1, 1], [[0, 0.5], [0.5, 0]])
        with pytest.raises(PreconditionError):
            sis.build_invariant_box(net)

    def test_box_outside_cube(self, ref_net):
        with pytest.raises(DomainError):
            sis.verify_inward_pointing(ref_net, ManifoldBox([0, 0], [1.5, 1]))


class TestMonotonicity:
    def test_ref_controlled(self, ref_net, ref_ctrl):
        box, _ = sis.build_invariant_box(ref_net, ref_ctrl)
        assert sis.kamke_muller_check(ref_net, box, ref_ctrl, samples=1000)

    def test_sign_flipped_fixture(self):
        from ph_eq.certificate import kamke_muller
        jac = lambda x: np.array([[-1.0, -0.5], [0.3, -1.0]])
        assert not kamke_muller(jac, np.full((5, 2), 0.5))

    @given(seeds)
    def test_random_instances(self, seed):
        net, ctrl, _ = instance(seed)
        assert sis.kamke_muller_check(net, ManifoldBox.cube(0, 1, net.n), ctrl, samples=200)


class TestControlAnalyses:
    def test_ref_comparison(self, ref_net, ref_ctrl):
        comp = sis.control_comparison(ref_net, ref_ctrl)
        assert comp.strictly_less
        np.testing.assert_allclose(comp.x_bar_star, X_BAR, atol=5e-4)
        np.testing.assert_allclose(comp.x_star, X_STAR, atol=5e-4)

    def test_zero_control_degenerate(self, ref_net):
        comp = sis.control_comparison(ref_net, sis.ControlSpec.none(2))
        np.testing.assert_array_equal(comp.x_star, comp.x_bar_star)
        assert not comp.strictly_less

    def test_single_node_control_helps_everyone(self, ref_net):
        ctrl = sis.ControlSpec([sis.ZeroControl(), sis.LinearControl(0.9)])
        assert sis.control_comparison(ref_net, ctrl).strictly_less

    @given(seeds)
    def test_ordering_on_random_instances(self, seed):
        net, ctrl, _ = instance(seed)
        if ctrl.is_zero:
            ctrl = sis.ControlSpec([sis.LinearControl(0.5)] + list(ctrl)[1:])
        assert sis.control_comparison(net, ctrl).strictly_less

    def test_continuation(self, ref_net, ref_ctrl):
        path = sis.continuation_alpha(ref_net, ref_ctrl, grid_size=11)
        assert [p.alpha for p in path] == pytest.approx(np.linspace(0, 1, 11))
        np.testing.assert_allclose(path[0].x, sis.solve_endemic(ref_net), atol=1e-10)
        np.testing.assert_allclose(path[-1].x, sis.solve_endemic(ref_net, ref_ctrl), atol=1e-10)
        xs = np.array([p.x for p in path])
        assert np.all(np.diff(xs, axis=0) < 0)

    def test_continuation_slope_matches_path(self, ref_net, ref_ctrl):
        path = sis.continuation_alpha(ref_net, ref_ctrl, grid_size=201)
        xs = np.array([p.x for p in path])
        slopes = np.array([p.slope for p in path])
        fd = np.gradient(xs, 1 / 200, axis=0)
        np.testing.assert_allclose(slopes[1:-1], fd[1:-1], rtol=1e-3, atol=1e-6)
        assert np.all(slopes < 0)

    def test_continuation_needs_active_control(self, ref_net):
        with pytest.raises(PreconditionError):
            sis.continuation_alpha(ref_net, sis.ControlSpec.none(2))


class TestSimulation:
    def test_stays_in_cube(self, ref_net, ref_ctrl, rng):
        cube = ManifoldBox.cube(0, 1, 2)
        for c in (None, ref_ctrl):
            f = sis.vector_field(ref_net, c)
            for x0 in rng.uniform(0, 1, (100, 2)):
                traj = integrate(f, x0, IntegratorConfig(T=200, atol=1e-8, rtol=1e-8))
                assert monitor_invariance(traj, cube, slack=1e-6)

    @given(seeds)
    def test_convergence_above_threshold(self, seed):
        net, ctrl, rng = instance(seed)
        x_bar = sis.solve_endemic(net, ctrl)
        f = sis.vector_field(net, ctrl)
        for x0 in rng.uniform(0, 1, (3, net.n)):
            final = integrate(f, x0, IntegratorConfig(T=500)).final
            assert np.max(np.abs(final - x_bar)) < 1e-3


def test_convergence_error_carries_residual(ref_net, monkeypatch):
    monkeypatch.setattr(sis, "_newton_polish", lambda net, ctrl, x, tol: x + 0.01)
    with pytest.raises(ConvergenceError) as info:
        sis.solve_endemic(ref_net)
    assert info.value.residual > 0
