"""Grid, coefficient functions, and assembly of the discrete operators.

On the rescaled domain s = x/b in (-1, 1) with uniform nodes s_j = j h,
h = 1/J, the semi-discrete system reads dV/dt = (B + S)V where

  (B V)_j = C_h (V_{j+1} - 2 V_j + V_{j-1}) / h^2 - m1(s_j) du V_j - m2(s_j) V_j

with du the upwind first difference, and S is the corrected trapezoidal
discretization of the singular jump integrals.  S splits exactly into a
Toeplitz part T (full kernel matrix, zero diagonal) and a tridiagonal part D
carrying the one-sided-difference corrections, which is what makes the
O(J log J) application possible.

Exterior values are identically zero (V_j = 0 for |j| >= J); under the
natural condition the same operators are used with m2 reduced to c'(bs).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .params import StableParams, riemann_zeta, skew_constants

__all__ = [
    "BoundaryCondition",
    "DriftSpec",
    "Grid",
    "DiscreteOperator",
    "g_function",
    "drift_c",
    "m1_values",
    "m2_values",
    "correction_ch",
    "assemble_B",
    "assemble_S",
    "assemble_operator",
    "drift_slope_bound",
]


class BoundaryCondition(str, Enum):
    ABSORBING = "absorbing"
    NATURAL = "natural"


@dataclass(frozen=True)
class DriftSpec:
    """Drift term f of the underlying SDE, with its derivative.

    kind is one of "zero", "linear" (f = slope * x) or "tabulated";
    tabulated drifts carry both f and f' sampled on a reference x-grid
    (f' is user data, never produced by internal differencing: the sign of
    m2, hence the maximum principle, must not depend on hidden differencing
    error).
    """

    kind: str = "zero"
    slope: float = 0.0
    x_table: np.ndarray | None = None
    f_table: np.ndarray | None = None
    fprime_table: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "linear", "tabulated"):
            raise ValueError(f"unknown drift kind {self.kind!r}")
        if self.kind == "tabulated":
            if self.x_table is None or self.f_table is None or self.fprime_table is None:
                raise ValueError("tabulated drift requires x, f and f' values")
            if not (len(self.x_table) == len(self.f_table) == len(self.fprime_table)):
                raise ValueError("tabulated drift columns must have equal length")

    @classmethod
    def zero(cls) -> "DriftSpec":
        return cls(kind="zero")

    @classmethod
    def linear(cls, slope: float) -> "DriftSpec":
        return cls(kind="linear", slope=float(slope))

    @classmethod
    def tabulated(cls, x, f, fprime) -> "DriftSpec":
        return cls(kind="tabulated",
                   x_table=np.asarray(x, dtype=float),
                   f_table=np.asarray(f, dtype=float),
                   fprime_table=np.asarray(fprime, dtype=float))

    def f(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "linear":
            return self.slope * x
        return np.interp(x, self.x_table, self.f_table)

    def fprime(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "linear":
            return np.full_like(x, self.slope)
        return np.interp(x, self.x_table, self.fprime_table)

    def mirrored(self) -> "DriftSpec":
        """The drift x -> -f(-x), whose density solves the beta -> -beta problem."""
        if self.kind == "zero":
            return self
        if self.kind == "linear":
            return self  # odd already
        return DriftSpec.tabulated(-self.x_table[::-1], -self.f_table[::-1],
                                   self.fprime_table[::-1])


@dataclass(frozen=True)
class Grid:
    """Uniform partition s_j = j h of [-1, 1] with h = 1/J.

    Interior unknowns are j = -J+1 .. J-1 (2J - 1 of them); exterior values
    are identically zero under the absorbing convention.
    """

    J: int
    s: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.J < 4:
            raise ValueError(f"J must be >= 4, got {self.J}")
        s = np.arange(-self.J + 1, self.J, dtype=float) / self.J
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @property
    def h(self) -> float:
        return 1.0 / self.J

    @property
    def n(self) -> int:
        return 2 * self.J - 1

    def x_nodes(self, b: float) -> np.ndarray:
        return b * self.s


@dataclass(frozen=True)
class DiscreteOperator:
    """Assembled B (tridiagonal), T (Toeplitz) and D (tridiagonal) pieces.

    Tridiagonal vectors are full length n = 2J-1; b_lower[0]/d_lower[0] and
    b_upper[-1]/d_upper[-1] multiply exterior (zero) neighbors and are kept
    only so row formulas stay index-aligned.  t_first_row[k] holds the
    upper-triangle kernel weight C~_n/(kh)^(1+alpha), t_first_col[k] the
    lower-triangle C~_p/(kh)^(1+alpha); the Toeplitz diagonal is zero.
    """

    grid: Grid
    params: StableParams
    drift: DriftSpec
    bc: BoundaryCondition
    c_h: float
    m1_values: np.ndarray
    m2_values: np.ndarray
    b_lower: np.ndarray
    b_diag: np.ndarray
    b_upper: np.ndarray
    t_first_col: np.ndarray
    t_first_row: np.ndarray
    d_lower: np.ndarray
    d_diag: np.ndarray
    d_upper: np.ndarray

    def __post_init__(self) -> None:
        for name in ("m1_values", "m2_values", "b_lower", "b_diag", "b_upper",
                     "t_first_col", "t_first_row", "d_lower", "d_diag", "d_upper"):
            arr = getattr(self, name)
            if arr.shape != (self.grid.n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({self.grid.n},)")
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def x_nodes(self) -> np.ndarray:
        return self.grid.x_nodes(self.params.b)


def g_function(s, alpha: float):
    """Antiderivative-type factor of the boundary-cut kernel.

    (1 - (1-|s|)^(1-alpha))/(1-alpha), and -ln(1-|s|) at alpha = 1; defined
    for |s| < 1 only (it blows up at the boundary once alpha >= 1).
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(np.abs(s_arr) >= 1.0):
        raise ValueError("g_function requires |s| < 1")
    one_m = 1.0 - np.abs(s_arr)
    if abs(alpha - 1.0) <= 1e-12:
        out = -np.log(one_m)
    else:
        out = (1.0 - one_m ** (1.0 - alpha)) / (1.0 - alpha)
    return float(out) if np.isscalar(s) or s_arr.ndim == 0 else out


def _compensator_shift(p: StableParams) -> float:
    """The constant part of c(x) - f(x): eps*K plus the cutoff-rescaling term."""
    if p.epsilon == 0.0:
        return 0.0
    cp, cn = skew_constants(p)
    if p.is_alpha_one:
        shift = (cp - cn) * np.log(p.b)
    else:
        shift = (cp - cn) * (p.b ** (1.0 - p.alpha) - 1.0) / (1.0 - p.alpha)
    return p.epsilon * (p.k_drift + shift)


def drift_c(x, spec: DriftSpec, p: StableParams):
    """Effective drift c(x) = f(x) + eps*K + cutoff-rescaling constant."""
    out = spec.f(x) + _compensator_shift(p)
    return float(out) if np.isscalar(x) else out


def m1_values(s, spec: DriftSpec, p: StableParams):
    """Advection coefficient of the rescaled equation.

    c(bs)/b - eps b^(-alpha) C_p g(s) on s < 0, with +eps b^(-alpha) C_n g(s)
    on s >= 0.
    """
    s_arr = np.asarray(s, dtype=float)
    c = drift_c(p.b * s_arr, spec, p)
    if p.epsilon == 0.0:
        out = np.asarray(c, dtype=float) / p.b
    else:
        cp, cn = skew_constants(p)
        g = g_function(s_arr, p.alpha)
        eba = p.epsilon * p.b ** (-p.alpha)
        out = np.where(s_arr < 0.0, c / p.b - eba * cp * g, c / p.b + eba * cn * g)
    return float(out) if np.isscalar(s) or s_arr.ndim == 0 else out


def m2_values(s, spec: DriftSpec, p: StableParams,
              bc: BoundaryCondition = BoundaryCondition.ABSORBING):
    """Reaction coefficient: c'(bs) plus, under the absorbing condition, the
    exit-rate bracket (eps b^(-alpha)/alpha)[C_n/(1-s)^alpha + C_p/(1+s)^alpha]."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(np.abs(s_arr) >= 1.0):
        raise ValueError("m2 requires |s| < 1")
    out = np.asarray(spec.fprime(p.b * s_arr), dtype=float).copy()
    if bc == BoundaryCondition.ABSORBING and p.epsilon > 0.0:
        cp, cn = skew_constants(p)
        eba = p.epsilon * p.b ** (-p.alpha)
        out += (eba / p.alpha) * (cn / (1.0 - s_arr) ** p.alpha
                                  + cp / (1.0 + s_arr) ** p.alpha)
    return float(out) if np.isscalar(s) or s_arr.ndim == 0 else out


def correction_ch(grid: Grid, p: StableParams) -> float:
    """Diffusion coefficient with the singular-quadrature correction.

    sigma^2/(2 b^2) - (eps b^(-alpha)/2) C_alpha zeta(alpha-1) h^(2-alpha);
    zeta(alpha-1) < 0 on (0, 2), so the correction is positive whenever
    eps > 0.
    """
    gauss = p.sigma**2 / (2.0 * p.b**2)
    if p.epsilon == 0.0:
        return gauss
    eba = p.epsilon * p.b ** (-p.alpha)
    return gauss - 0.5 * eba * p.c_alpha * riemann_zeta(p.alpha - 1.0) \
        * grid.h ** (2.0 - p.alpha)


def drift_slope_bound(p: StableParams, samples: int = 20001) -> float:
    """Lower bound on admissible f' for the discrete maximum principle.

    min over s in (-1,1) of (eps b^(-alpha)/alpha)[C_n/(1-s)^alpha +
    C_p/(1+s)^alpha]; any drift with f' >= -bound keeps m2 >= 0.  The
    bracket is strictly convex, so a fine-grid minimum refined by golden
    section is exact to tolerance.
    """
    if p.epsilon == 0.0:
        return 0.0
    from scipy.optimize import minimize_scalar

    cp, cn = skew_constants(p)
    eba = p.epsilon * p.b ** (-p.alpha)

    def bracket(s):
        return (eba / p.alpha) * (cn / (1.0 - s) ** p.alpha + cp / (1.0 + s) ** p.alpha)

    s = np.linspace(-1.0 + 1e-9, 1.0 - 1e-9, samples)
    coarse = bracket(s)
    k = int(np.argmin(coarse))
    lo = s[max(k - 1, 0)]
    hi = s[min(k + 1, samples - 1)]
    res = minimize_scalar(bracket, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(min(res.fun, coarse[k]))


def assemble_B(grid: Grid, p: StableParams, spec: DriftSpec,
               bc: BoundaryCondition) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tridiagonal advection-diffusion-reaction part (lower, diag, upper).

    Row j couples to V_{j-1} when m1(s_j) > 0 (backward difference) and to
    V_{j+1} when m1(s_j) < 0; the m1 = 0 tie takes the forward branch, whose
    coefficient vanishes, so assembly stays deterministic either way.
    """
    h = grid.h
    m1 = np.asarray(m1_values(grid.s, spec, p))
    m2 = np.asarray(m2_values(grid.s, spec, p, bc))
    ch = correction_ch(grid, p)
    lower = ch / h**2 + np.where(m1 > 0.0, m1 / h, 0.0)
    upper = ch / h**2 + np.where(m1 < 0.0, -m1 / h, 0.0)
    diag = -2.0 * ch / h**2 - np.abs(m1) / h - m2
    return lower, diag, upper


def assemble_S(grid: Grid, p: StableParams) -> tuple[
        np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Toeplitz + tridiagonal split of the trapezoidal jump sums.

    Returns (t_first_col, t_first_row, d_lower, d_diag, d_upper).  With
    q_m = (mh)^(-alpha-1), r_m = (mh)^(-alpha) and prefix sums Q, R, each row
    j reduces to

      a_{J+j} = -C~_n [Q(J-j) - q_{J-j}/2] - C~_p [Q(J+j) - q_{J+j}/2]
                - b_{J+j} - p_{J+j},

    where the sub/superdiagonal entries b, p hold the zeroth-order sums of
    the one-sided-difference corrections; their summation ranges switch at
    j = 0, matching the halved-endpoint conventions of the trapezoidal rule
    (a single-term primed sum keeps its 1/2).
    """
    J = grid.J
    h = grid.h
    n = grid.n
    cp, cn = skew_constants(p) if p.epsilon > 0.0 else (0.0, 0.0)
    eba = p.epsilon * p.b ** (-p.alpha) if p.epsilon > 0.0 else 0.0
    cpt = eba * cp * h
    cnt = eba * cn * h

    m = np.arange(1, 2 * J, dtype=float)
    q = (m * h) ** (-p.alpha - 1.0)
    r = (m * h) ** (-p.alpha)
    Q = np.cumsum(q)
    R = np.cumsum(r)

    t_col = np.zeros(n)
    t_row = np.zeros(n)
    t_col[1:] = cpt * q[: n - 1]
    t_row[1:] = cnt * q[: n - 1]

    js = np.arange(-J + 1, J)
    np_right = J - js            # distance to the right boundary node
    nm_left = J + js             # distance to the left boundary node
    sum_q_right = Q[np_right - 1] - 0.5 * q[np_right - 1]
    sum_q_left = Q[nm_left - 1] - 0.5 * q[nm_left - 1]
    sum_r_right = np.where(js <= 0, R[J - 1] - 0.5 * r[J - 1],
                           R[np_right - 1] - 0.5 * r[np_right - 1])
    sum_r_left = np.where(js <= 0, R[nm_left - 1] - 0.5 * r[nm_left - 1],
                          R[J - 1] - 0.5 * r[J - 1])

    d_lower = (cnt / h) * sum_r_right
    d_upper = (cpt / h) * sum_r_left
    d_diag = -cnt * sum_q_right - cpt * sum_q_left - d_lower - d_upper
    return t_col, t_row, d_lower, d_diag, d_upper


def assemble_operator(grid: Grid, p: StableParams, spec: DriftSpec | None = None,
                      bc: BoundaryCondition = BoundaryCondition.ABSORBING) -> DiscreteOperator:
    """Assemble the full semi-discrete operator A = B + T + D."""
    spec = spec or DriftSpec.zero()
    bc = BoundaryCondition(bc)
    if bc == BoundaryCondition.NATURAL and p.epsilon > 0.0 and p.b < 5.0:
        warnings.warn(
            "natural condition with b < 5: the domain truncation may lose "
            "noticeable probability mass", stacklevel=2)
    lower, diag, upper = assemble_B(grid, p, spec, bc)
    t_col, t_row, d_lower, d_diag, d_upper = assemble_S(grid, p)
    return DiscreteOperator(
        grid=grid, params=p, drift=spec, bc=bc,
        c_h=correction_ch(grid, p),
        m1_values=np.asarray(m1_values(grid.s, spec, p)),
        m2_values=np.asarray(m2_values(grid.s, spec, p, bc)),
        b_lower=lower, b_diag=diag, b_upper=upper,
        t_first_col=t_col, t_first_row=t_row,
        d_lower=d_lower, d_diag=d_diag, d_upper=d_upper,
    )
