"""Time integration: stepping, solvers, maximum principle, mass decay."""

import numpy as np
import pytest

from levyfpe import (BoundaryCondition, DriftSpec, FastWorkspace, Grid,
                     SolverError, StableParams, StepperConfig,
                     assemble_operator, backward_euler_step,
                     check_max_principle_condition, forward_euler_step,
                     make_linear_solver, run)


def gaussian(x, center=0.0, rate=40.0):
    return np.sqrt(rate / np.pi) * np.exp(-rate * (x - center) ** 2)


def make_op(J=64, alpha=0.5, beta=0.5, sigma=0.0, slope=None, b=1.0):
    spec = DriftSpec.zero() if slope is None else DriftSpec.linear(slope)
    return assemble_operator(Grid(J), StableParams(alpha, beta, sigma=sigma, b=b), spec)


class TestStepperConfig:
    def test_defaults_validate(self):
        cfg = StepperConfig(dt=0.01, t_final=1.0, snapshot_times=(0.5, 1.0))
        assert cfg.scheme == "backward_euler"

    @pytest.mark.parametrize("kwargs", [
        dict(dt=0.0, t_final=1.0),
        dict(dt=0.01, t_final=-1.0),
        dict(dt=0.01, t_final=1.0, scheme="rk4"),
        dict(dt=0.01, t_final=1.0, solver="cg"),
        dict(dt=0.01, t_final=1.0, tol=1e-3),
        dict(dt=0.01, t_final=1.0, tol=0.0),
        dict(dt=0.01, t_final=1.0, snapshot_times=(2.0,)),
        dict(dt=0.01, t_final=1.0, snapshot_times=(0.005,)),
        dict(dt=0.03, t_final=1.0),
    ])
    def test_invariants(self, kwargs):
        with pytest.raises(ValueError):
            StepperConfig(**kwargs)

    def test_snapshot_divisibility_tolerance(self):
        # 0.1 is not an exact binary multiple of 1/800 but divides within 1e-12
        StepperConfig(dt=1.0 / 800.0, t_final=1.0, snapshot_times=(0.1, 1.0))


class TestSteps:
    def test_forward_zero_dt(self):
        op = make_op()
        v = gaussian(op.x_nodes)
        assert np.array_equal(forward_euler_step(op, v, 0.0), v)

    def test_forward_zero_state(self):
        op = make_op()
        out = forward_euler_step(op, np.zeros(op.n), 0.01)
        assert np.all(out == 0.0)

    def test_backward_zero_dt(self):
        op = make_op()
        v = gaussian(op.x_nodes)
        assert np.array_equal(backward_euler_step(op, v, 0.0), v)

    def test_backward_consistency(self):
        # (I - dt A) W = V  =>  applying the matrix to W recovers V
        op = make_op(J=32)
        ws = FastWorkspace(op)
        v = gaussian(op.x_nodes)
        dt = 1e-3
        w = backward_euler_step(op, v, dt, ws)
        from levyfpe import apply_A
        assert np.allclose(w - dt * apply_A(op, w, ws), v, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("scheme", ["forward", "backward"])
    def test_step_linearity(self, scheme):
        op = make_op(J=32, alpha=1.5, beta=-0.5)
        ws = FastWorkspace(op)
        v = np.random.default_rng(0).standard_normal(op.n)
        if scheme == "forward":
            one = forward_euler_step(op, v, 1e-3, ws)
            three = forward_euler_step(op, 3.0 * v, 1e-3, ws)
        else:
            solver = make_linear_solver(op, 1e-3, "dense_lu")
            one = backward_euler_step(op, v, 1e-3, ws, solver)
            three = backward_euler_step(op, 3.0 * v, 1e-3, ws, solver)
        assert np.max(np.abs(three - 3.0 * one)) <= 1e-12 * np.max(np.abs(one))

    def test_dense_vs_matrix_free_single_step(self):
        op = make_op(J=64, alpha=1.5, beta=0.5)
        ws = FastWorkspace(op)
        v = gaussian(op.x_nodes)
        dt = 1e-3
        lu = backward_euler_step(op, v, dt, ws, make_linear_solver(op, dt, "dense_lu"))
        mf = backward_euler_step(op, v, dt, ws,
                                 make_linear_solver(op, dt, "matrix_free", ws))
        assert np.max(np.abs(lu - mf)) <= 1e-8


class TestSolvers:
    def test_matrix_free_nonconvergence_raises(self):
        op = make_op(J=64)
        ws = FastWorkspace(op)
        solver = make_linear_solver(op, 0.5, "matrix_free", ws, tol=1e-10,
                                    max_iter=1, restart=1, precondition=False)
        with pytest.raises(SolverError) as err:
            solver.solve(gaussian(op.x_nodes))
        assert err.value.residual > 0.0

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            make_linear_solver(make_op(), 0.1, "jacobi")

    def test_matrix_free_residual_contract(self):
        op = make_op(J=64, alpha=0.5, beta=0.5, slope=-0.6)
        ws = FastWorkspace(op)
        dt, tol = 1e-3, 1e-10
        solver = make_linear_solver(op, dt, "matrix_free", ws, tol=tol)
        from levyfpe import apply_A
        v = gaussian(op.x_nodes)
        w = solver.solve(v)
        resid = np.max(np.abs(w - dt * apply_A(op, w, ws) - v))
        assert resid <= tol * np.max(np.abs(v))


class TestRun:
    def test_zero_horizon_keeps_only_ic(self):
        op = make_op()
        cfg = StepperConfig(dt=0.01, t_final=0.0)
        traj = run(op, gaussian(op.x_nodes), cfg)
        assert len(traj.entries) == 1
        assert traj.entries[0].t == 0.0

    def test_snapshot_schedule(self):
        op = make_op(J=32)
        cfg = StepperConfig(dt=1.0 / 64.0, t_final=0.5, snapshot_times=(0.25, 0.5))
        traj = run(op, gaussian(op.x_nodes), cfg)
        assert traj.times == [0.0, 0.25, 0.5]
        assert all(e.values.shape == (op.n,) for e in traj.entries)
        assert traj.per_step_mass.shape == (33,)

    def test_entry_stats(self):
        op = make_op(J=32)
        cfg = StepperConfig(dt=1.0 / 64.0, t_final=0.25)
        traj = run(op, gaussian(op.x_nodes), cfg)
        final = traj.final()
        assert final.vmin == final.values.min()
        assert final.vmax == final.values.max()
        assert final.argmax_index == int(np.argmax(final.values))
        assert final.mass == pytest.approx(np.trapezoid(final.values, traj.x_nodes))

    def test_bad_initial_condition(self):
        op = make_op()
        cfg = StepperConfig(dt=0.01, t_final=0.1)
        with pytest.raises(ValueError):
            run(op, np.zeros(op.n + 2), cfg)
        bad = np.zeros(op.n)
        bad[3] = np.nan
        with pytest.raises(ValueError):
            run(op, bad, cfg)

    def test_solver_failure_carries_time(self):
        op = make_op(J=32)
        cfg = StepperConfig(dt=0.25, t_final=0.5, solver="matrix_free",
                            max_iter=1, restart=1, precondition=False)
        with pytest.raises(SolverError) as err:
            run(op, gaussian(op.x_nodes), cfg)
        assert err.value.t == pytest.approx(0.25)

    def test_mass_decays_under_absorbing(self):
        op = make_op(J=100, alpha=0.5, beta=0.5)
        cfg = StepperConfig(dt=0.005, t_final=0.5)
        traj = run(op, gaussian(op.x_nodes), cfg)
        assert np.all(np.diff(traj.per_step_mass) <= 1e-8)
        assert traj.per_step_mass[-1] < traj.per_step_mass[0]

    def test_dense_and_matrix_free_trajectories_agree(self):
        op = make_op(J=64, alpha=1.5, beta=0.5, slope=-0.6)
        base = dict(dt=1.0 / 128.0, t_final=0.25, tol=1e-10)
        t_lu = run(op, gaussian(op.x_nodes), StepperConfig(solver="dense_lu", **base))
        t_mf = run(op, gaussian(op.x_nodes), StepperConfig(solver="matrix_free", **base))
        diff = np.max(np.abs(t_lu.final().values - t_mf.final().values))
        assert diff <= 1e-7
        assert t_mf.solver_iterations is not None
        assert t_lu.solver_iterations is None

    def test_forward_euler_metadata(self):
        op = make_op(J=32)
        cfg = StepperConfig(dt=1e-4, t_final=1e-3, scheme="forward_euler")
        traj = run(op, gaussian(op.x_nodes), cfg)
        assert traj.scheme == "forward_euler"

    def test_fast_mode_large_grid_100_steps_under_a_minute(self):
        # ~0.4 s here; the bound is a generous commodity-hardware budget
        import time
        t0 = time.perf_counter()
        op = make_op(J=3200, alpha=0.5, beta=0.5)
        cfg = StepperConfig(dt=1e-3, t_final=0.1, solver="matrix_free")
        traj = run(op, gaussian(op.x_nodes), cfg)
        assert len(traj.step_seconds) == 100
        assert time.perf_counter() - t0 < 60.0


class TestMaxPrinciple:
    def test_margin_restoring_drift(self):
        satisfied, margin = check_max_principle_condition(
            make_op(J=400, slope=-0.6))
        assert satisfied
        assert margin == pytest.approx(0.16, abs=0.01)

    def test_margin_steep_drift_fails(self):
        satisfied, margin = check_max_principle_condition(
            make_op(J=400, slope=-1.0))
        assert not satisfied
        assert margin == pytest.approx(-0.24, abs=0.01)

    def test_nonnegative_slope_always_satisfies(self):
        for slope in (0.0, 0.3, 2.0):
            satisfied, _ = check_max_principle_condition(
                make_op(J=100, slope=slope))
            assert satisfied

    @pytest.mark.parametrize("kwargs", [
        dict(J=100, slope=-0.6),
        dict(J=100, slope=0.3, alpha=1.5, beta=-0.5),
        dict(J=64, slope=None, alpha=0.8, beta=1.0, sigma=0.5),
        dict(J=64, slope=-0.5, alpha=1.0, beta=0.5),
    ])
    def test_backward_euler_preserves_bounds(self, kwargs):
        # any margin >= 0 config: min stays >= -1e-12, max below the initial max
        op = make_op(**kwargs)
        assert check_max_principle_condition(op)[0]
        ic = gaussian(op.x_nodes)
        cfg = StepperConfig(dt=0.5 / kwargs["J"], t_final=0.5)
        traj = run(op, ic, cfg)
        assert traj.global_min >= -1e-12
        assert traj.global_max <= ic.max() + 1e-12

    def test_natural_condition_bounds_with_monotone_drift(self):
        # under the natural condition the requirement is f' >= 0
        spec = DriftSpec.linear(0.4)
        op = assemble_operator(Grid(64), StableParams(0.5, 0.5, b=10.0), spec,
                               BoundaryCondition.NATURAL)
        assert check_max_principle_condition(op)[0]
        ic = gaussian(op.x_nodes)
        traj = run(op, ic, StepperConfig(dt=0.01, t_final=0.3))
        assert traj.global_min >= -1e-12
        assert traj.global_max <= ic.max() + 1e-12
