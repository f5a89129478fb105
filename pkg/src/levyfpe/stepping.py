"""Time integration of dV/dt = A V with maximum-principle diagnostics.

Backward Euler is the production scheme: with m2 >= 0 the matrix I - dt*A is
an M-matrix (nonnegative off-diagonal entries of A, diagonally dominant), so
nonnegative states stay nonnegative for any step size.  Forward Euler is
retained only to exhibit its loss of positivity and is flagged as such in
run metadata.

The implicit step is solved either by a dense LU factored once per run or by
restarted GMRES on the matrix-free fast apply, preconditioned with the
tridiagonal part I - dt*(B + D).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve, solve_banded
from scipy.sparse.linalg import LinearOperator, gmres

from .discretize import DiscreteOperator
from .operators import FastWorkspace, apply_A, dense_matrix

__all__ = [
    "StepperConfig",
    "Trajectory",
    "TrajectoryEntry",
    "SolverError",
    "make_linear_solver",
    "forward_euler_step",
    "backward_euler_step",
    "run",
    "check_max_principle_condition",
]

SCHEMES = ("backward_euler", "forward_euler")
SOLVERS = ("dense_lu", "matrix_free")


class SolverError(RuntimeError):
    """Implicit solve failed to reach its residual tolerance."""

    def __init__(self, message: str, residual: float, t: float | None = None):
        super().__init__(message)
        self.residual = residual
        self.t = t


def _steps_for(t: float, dt: float, what: str) -> int:
    ratio = t / dt
    k = round(ratio)
    if abs(ratio - k) > 1e-12 * max(1.0, abs(ratio)):
        raise ValueError(f"dt={dt} does not divide {what}={t}")
    return int(k)


@dataclass(frozen=True)
class StepperConfig:
    """Scheme, step size, horizon, solver choice and snapshot schedule."""

    dt: float
    t_final: float
    scheme: str = "backward_euler"
    snapshot_times: tuple[float, ...] = ()
    solver: str = "matrix_free"
    tol: float = 1e-10
    max_iter: int = 500
    restart: int = 60
    precondition: bool = True
    mode: str = "fast"

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.t_final < 0.0:
            raise ValueError(f"t_final must be >= 0, got {self.t_final}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if not 0.0 < self.tol <= 1e-4:
            raise ValueError(f"solver tol must lie in (0, 1e-4], got {self.tol}")
        if self.mode not in ("fast", "dense"):
            raise ValueError(f"mode must be 'fast' or 'dense', got {self.mode!r}")
        _steps_for(self.t_final, self.dt, "t_final")
        for t in self.snapshot_times:
            if t < 0.0 or t > self.t_final * (1.0 + 1e-12):
                raise ValueError(f"snapshot time {t} outside [0, t_final]")
            _steps_for(t, self.dt, "snapshot time")


@dataclass(frozen=True)
class TrajectoryEntry:
    t: float
    values: np.ndarray
    mass: float
    vmin: float
    vmax: float
    argmax_index: int


@dataclass
class Trajectory:
    """Snapshots plus per-step diagnostics of one run.

    entries hold the requested snapshots (initial state always included);
    per_step_mass, global_min and global_max quantify over every step, which
    is what the maximum-principle and mass-monotonicity checks need.
    """

    entries: list[TrajectoryEntry]
    x_nodes: np.ndarray
    per_step_mass: np.ndarray
    global_min: float
    global_max: float
    step_seconds: np.ndarray
    solver_iterations: list[int] | None
    scheme: str

    def __post_init__(self) -> None:
        times = [e.t for e in self.entries]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("snapshot times must be strictly increasing")
        n = len(self.x_nodes)
        if any(e.values.shape != (n,) for e in self.entries):
            raise ValueError("snapshot vectors must all match the grid size")

    @property
    def times(self) -> list[float]:
        return [e.t for e in self.entries]

    def final(self) -> TrajectoryEntry:
        return self.entries[-1]


class _DenseLUSolver:
    def __init__(self, op: DiscreteOperator, dt: float):
        n = op.n
        m = -dt * dense_matrix(op)
        m[np.arange(n), np.arange(n)] += 1.0
        self._lu = lu_factor(m)
        self.iterations: int = 0

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        self.iterations = 0
        return lu_solve(self._lu, rhs)


class _MatrixFreeSolver:
    """Restarted GMRES on w -> w - dt*A w with a tridiagonal preconditioner.

    The inner 2-norm tolerance is tol/sqrt(n) so that the sup-norm residual
    contract ||(I - dt A)W - V||_inf <= tol ||V||_inf holds, and the bound is
    verified explicitly after each solve.
    """

    def __init__(self, op: DiscreteOperator, dt: float, ws: FastWorkspace,
                 tol: float, max_iter: int, restart: int, precondition: bool,
                 mode: str = "fast"):
        self._op = op
        self._dt = dt
        self._ws = ws
        self._tol = tol
        self._restart = max(1, restart)
        self._outer = max(1, -(-max_iter // self._restart))
        n = op.n
        self._lin = LinearOperator((n, n), matvec=self._matvec, dtype=float)
        self._mode = mode
        self._precond = None
        if precondition:
            ab = np.zeros((3, n))
            ab[0, 1:] = -dt * ws.tri_upper[:-1]
            ab[1, :] = 1.0 - dt * ws.tri_diag
            ab[2, :-1] = -dt * ws.tri_lower[1:]
            self._ab = ab
            self._precond = LinearOperator((n, n), matvec=self._apply_precond,
                                           dtype=float)
        self.iterations = 0

    def _matvec(self, w: np.ndarray) -> np.ndarray:
        return w - self._dt * apply_A(self._op, w, self._ws, mode=self._mode)

    def _apply_precond(self, r: np.ndarray) -> np.ndarray:
        return solve_banded((1, 1), self._ab, r)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        scale = float(np.max(np.abs(rhs)))
        if scale == 0.0:
            self.iterations = 0
            return np.zeros_like(rhs)
        count = [0]

        def cb(_):
            count[0] += 1

        inner_rtol = self._tol / np.sqrt(len(rhs))
        w, info = gmres(self._lin, rhs, rtol=inner_rtol, atol=0.0,
                        restart=self._restart, maxiter=self._outer,
                        M=self._precond, callback=cb, callback_type="pr_norm")
        self.iterations = count[0]
        residual = float(np.max(np.abs(self._matvec(w) - rhs)))
        if info != 0 or residual > self._tol * scale:
            raise SolverError(
                f"implicit solve stalled: sup-norm residual {residual:.3e} "
                f"exceeds {self._tol:.1e} * ||rhs||_inf after "
                f"{self.iterations} iterations", residual)
        return w


def make_linear_solver(op: DiscreteOperator, dt: float, kind: str = "dense_lu",
                       ws: FastWorkspace | None = None, tol: float = 1e-10,
                       max_iter: int = 500, restart: int = 60,
                       precondition: bool = True, mode: str = "fast"):
    """Build the implicit-step solver once; A is time-independent, so the
    factorization / workspace is reused across every step of a run."""
    if kind == "dense_lu":
        return _DenseLUSolver(op, dt)
    if kind == "matrix_free":
        return _MatrixFreeSolver(op, dt, ws or FastWorkspace(op), tol,
                                 max_iter, restart, precondition, mode)
    raise ValueError(f"unknown solver kind {kind!r}")


def forward_euler_step(op: DiscreteOperator, v: np.ndarray, dt: float,
                       ws: FastWorkspace | None = None, mode: str = "fast") -> np.ndarray:
    """One explicit step V + dt * A V.  Not positivity-preserving."""
    if dt == 0.0:
        return np.array(v, dtype=float, copy=True)
    return v + dt * apply_A(op, np.asarray(v, dtype=float), ws, mode=mode)


def backward_euler_step(op: DiscreteOperator, v: np.ndarray, dt: float,
                        ws: FastWorkspace | None = None, solver=None) -> np.ndarray:
    """One implicit step, solving (I - dt A) W = V."""
    v = np.asarray(v, dtype=float)
    if dt == 0.0:
        return np.array(v, copy=True)
    if solver is None:
        solver = make_linear_solver(op, dt, "dense_lu", ws)
    return solver.solve(v)


def check_max_principle_condition(op: DiscreteOperator) -> tuple[bool, float]:
    """Margin of the maximum-principle condition m2 >= 0 on interior nodes."""
    margin = float(np.min(op.m2_values))
    return margin >= 0.0, margin


def _trapezoid_mass(v: np.ndarray, x: np.ndarray) -> float:
    return float(np.trapezoid(v, x))


def run(op: DiscreteOperator, ic: np.ndarray, cfg: StepperConfig,
        ws: FastWorkspace | None = None) -> Trajectory:
    """March the semi-discrete system and record snapshots and diagnostics.

    Snapshots are taken at cfg.snapshot_times plus the initial and final
    times; per-step mass and the running min/max over all steps are always
    recorded.  Solver failures are re-raised with the failing time attached.
    """
    v = np.asarray(ic, dtype=float)
    if v.shape != (op.n,):
        raise ValueError(f"initial condition has shape {v.shape}, expected ({op.n},)")
    if not np.all(np.isfinite(v)):
        raise ValueError("initial condition contains non-finite values")
    ws = ws or FastWorkspace(op)
    x = op.x_nodes
    nsteps = _steps_for(cfg.t_final, cfg.dt, "t_final")
    snap_steps = {0, nsteps}
    snap_steps.update(_steps_for(t, cfg.dt, "snapshot time") for t in cfg.snapshot_times)

    solver = None
    if cfg.scheme == "backward_euler" and nsteps > 0:
        solver = make_linear_solver(op, cfg.dt, cfg.solver, ws, cfg.tol,
                                    cfg.max_iter, cfg.restart, cfg.precondition,
                                    cfg.mode)

    def entry(step: int, values: np.ndarray) -> TrajectoryEntry:
        frozen = values.copy()
        frozen.setflags(write=False)
        return TrajectoryEntry(
            t=step * cfg.dt, values=frozen, mass=_trapezoid_mass(values, x),
            vmin=float(values.min()), vmax=float(values.max()),
            argmax_index=int(np.argmax(values)))

    entries = [entry(0, v)]
    masses = [entries[0].mass]
    gmin, gmax = entries[0].vmin, entries[0].vmax
    seconds = []
    iterations: list[int] = []
    v = v.copy()
    for step in range(1, nsteps + 1):
        t0 = time.perf_counter()
        try:
            if cfg.scheme == "forward_euler":
                v = forward_euler_step(op, v, cfg.dt, ws, mode=cfg.mode)
            else:
                v = solver.solve(v)
                if cfg.solver == "matrix_free":
                    iterations.append(solver.iterations)
        except SolverError as exc:
            raise SolverError(f"step to t={step * cfg.dt:.6g} failed: {exc}",
                              exc.residual, t=step * cfg.dt) from exc
        seconds.append(time.perf_counter() - t0)
        masses.append(_trapezoid_mass(v, x))
        gmin = min(gmin, float(v.min()))
        gmax = max(gmax, float(v.max()))
        if step in snap_steps:
            entries.append(entry(step, v))

    return Trajectory(
        entries=entries, x_nodes=x, per_step_mass=np.asarray(masses),
        global_min=gmin, global_max=gmax,
        step_seconds=np.asarray(seconds),
        solver_iterations=iterations if iterations else None,
        scheme=cfg.scheme)
