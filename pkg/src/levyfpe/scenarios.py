"""Scenario configuration: flat key=value files, sweeps, built-in recipes.

A scenario file is a flat list of `key = value` lines ('#' starts a
comment).  The keys alpha, beta, epsilon, sigma (or sigma2), b, drift, ic
and bc accept comma-separated lists and expand to a cartesian sweep of
runs; every other key is scalar.  Units: x and b in physical space, times
in the equation's time, sigma2 = sigma squared.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .analysis import exact_levy_density
from .discretize import BoundaryCondition, DriftSpec, Grid, assemble_operator
from .params import StableParams
from .stepping import StepperConfig

__all__ = [
    "ConfigError",
    "ICSpec",
    "ScenarioConfig",
    "parse_config",
    "figure_recipe",
    "named_recipe",
    "RECIPE_NAMES",
]


class ConfigError(ValueError):
    """Malformed or out-of-range scenario configuration."""


@dataclass(frozen=True)
class ICSpec:
    """Initial density: gaussian(center, rate), uniform, exact skewed-Levy
    density at time t0, or a two-column x,p file (linearly interpolated)."""

    kind: str = "gaussian"
    center: float = 0.0
    rate: float = 40.0
    t0: float = 0.2
    path: str = ""

    def evaluate(self, x: np.ndarray, b: float) -> np.ndarray:
        if self.kind == "gaussian":
            return np.sqrt(self.rate / np.pi) * np.exp(-self.rate * (x - self.center) ** 2)
        if self.kind == "uniform":
            return np.full_like(x, 1.0 / (2.0 * b))
        if self.kind == "levy_exact":
            # Sampled at the nodes and deliberately not renormalized.
            return np.asarray(exact_levy_density(x, self.t0))
        if self.kind == "file":
            data = np.loadtxt(self.path, delimiter=",", ndmin=2)
            return np.interp(x, data[:, 0], data[:, 1])
        raise ConfigError(f"unknown ic kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "gaussian":
            return f"gaussian:{self.center:g}:{self.rate:g}"
        if self.kind == "levy_exact":
            return f"levy_exact:{self.t0:g}"
        if self.kind == "file":
            return f"file:{self.path}"
        return self.kind


@dataclass(frozen=True)
class ScenarioConfig:
    """One fully resolved run (parse_config expands sweeps into these)."""

    alpha: float = 0.5
    beta: float = 0.0
    epsilon: float = 1.0
    sigma: float = 0.0
    b: float = 1.0
    J: int = 100
    dt: float | None = None          # None = auto = 0.5 h
    t_final: float = 1.0
    drift: DriftSpec = DriftSpec.zero()
    bc: BoundaryCondition = BoundaryCondition.ABSORBING
    ic: ICSpec = ICSpec()
    scheme: str = "backward_euler"
    solver: str = "auto"
    tol: float = 1e-10
    max_iter: int = 500
    restart: int = 60
    precondition: bool = True
    mode: str = "fast"
    snapshot_times: tuple[float, ...] = ()
    formats: tuple[str, ...] = ("csv",)

    @property
    def dt_value(self) -> float:
        return 0.5 / self.J if self.dt is None else self.dt

    def stable_params(self) -> StableParams:
        return StableParams(alpha=self.alpha, beta=self.beta, epsilon=self.epsilon,
                            sigma=self.sigma, b=self.b)

    def grid(self) -> Grid:
        return Grid(self.J)

    def resolved_solver(self) -> str:
        if self.solver != "auto":
            return self.solver
        return "matrix_free" if self.mode == "fast" else "dense_lu"

    def stepper_config(self) -> StepperConfig:
        times = self.snapshot_times or (self.t_final,)
        if self.t_final == 0.0:
            times = ()
        return StepperConfig(dt=self.dt_value, t_final=self.t_final,
                             scheme=self.scheme, snapshot_times=times,
                             solver=self.resolved_solver(), tol=self.tol,
                             max_iter=self.max_iter, restart=self.restart,
                             precondition=self.precondition, mode=self.mode)

    def build_operator(self):
        return assemble_operator(self.grid(), self.stable_params(), self.drift, self.bc)

    def initial_values(self, op) -> np.ndarray:
        return self.ic.evaluate(op.x_nodes, self.b)


_SWEEP_KEYS = ("alpha", "beta", "epsilon", "sigma", "b", "drift", "bc", "ic")
_ALL_KEYS = set(_SWEEP_KEYS) | {
    "sigma2", "J", "dt", "t_final", "scheme", "solver", "solver_tol",
    "solver_max_iter", "solver_restart", "precondition", "mode",
    "snapshot_times", "formats",
}


def _parse_float(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {text!r} as a number") from None


def _parse_drift(text: str) -> DriftSpec:
    if text == "zero":
        return DriftSpec.zero()
    if text.startswith("linear:"):
        return DriftSpec.linear(_parse_float("drift", text.split(":", 1)[1]))
    if text.startswith("table:"):
        path = text.split(":", 1)[1]
        data = np.loadtxt(path, delimiter=",", ndmin=2)
        if data.shape[1] < 3:
            raise ConfigError("drift table needs three columns: x, f, f'")
        return DriftSpec.tabulated(data[:, 0], data[:, 1], data[:, 2])
    raise ConfigError(f"key 'drift': expected zero | linear:SLOPE | table:PATH, got {text!r}")


def _parse_ic(text: str) -> ICSpec:
    parts = text.split(":")
    if parts[0] == "gaussian":
        center = float(parts[1]) if len(parts) > 1 else 0.0
        rate = float(parts[2]) if len(parts) > 2 else 40.0
        return ICSpec(kind="gaussian", center=center, rate=rate)
    if parts[0] == "uniform":
        return ICSpec(kind="uniform")
    if parts[0] == "levy_exact":
        if len(parts) != 2:
            raise ConfigError("ic levy_exact needs a start time: levy_exact:T0")
        return ICSpec(kind="levy_exact", t0=float(parts[1]))
    if parts[0] == "file":
        return ICSpec(kind="file", path=text.split(":", 1)[1])
    raise ConfigError(f"key 'ic': unknown initial condition {text!r}")


def _parse_bool(key: str, text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"key {key!r}: expected a boolean, got {text!r}")


def _key_values(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_config(text: str) -> list[tuple[str, ScenarioConfig]]:
    """Parse a scenario document into labeled, validated run configs.

    Sweep keys holding comma lists expand to a cartesian product; the label
    of each entry names the swept key=value pairs (empty for a single run).
    Raises ConfigError naming the offending key on any violation.
    """
    kv = _key_values(text)
    if "sigma" in kv and "sigma2" in kv:
        raise ConfigError("keys 'sigma' and 'sigma2' are mutually exclusive")

    sweeps: dict[str, list] = {}
    for key in _SWEEP_KEYS:
        source_key = key
        if key == "sigma" and "sigma2" in kv:
            source_key = "sigma2"
        if source_key not in kv:
            continue
        raw_items = [item.strip() for item in kv[source_key].split(",")]
        if key == "drift":
            sweeps[key] = [_parse_drift(item) for item in raw_items]
        elif key == "ic":
            sweeps[key] = [_parse_ic(item) for item in raw_items]
        elif key == "bc":
            try:
                sweeps[key] = [BoundaryCondition(item) for item in raw_items]
            except ValueError:
                raise ConfigError(f"key 'bc': expected absorbing | natural, "
                                  f"got {kv[source_key]!r}") from None
        elif source_key == "sigma2":
            vals = [_parse_float("sigma2", item) for item in raw_items]
            if any(v < 0 for v in vals):
                raise ConfigError("key 'sigma2': values must be >= 0")
            sweeps[key] = [float(np.sqrt(v)) for v in vals]
        else:
            sweeps[key] = [_parse_float(key, item) for item in raw_items]

    base_kwargs = {}
    if "J" in kv:
        try:
            base_kwargs["J"] = int(kv["J"])
        except ValueError:
            raise ConfigError(f"key 'J': expected an integer, got {kv['J']!r}") from None
    if "dt" in kv:
        base_kwargs["dt"] = None if kv["dt"] == "auto" else _parse_float("dt", kv["dt"])
    if "t_final" in kv:
        base_kwargs["t_final"] = _parse_float("t_final", kv["t_final"])
    if "scheme" in kv:
        if kv["scheme"] not in ("backward_euler", "forward_euler"):
            raise ConfigError(f"key 'scheme': got {kv['scheme']!r}")
        base_kwargs["scheme"] = kv["scheme"]
    if "solver" in kv:
        if kv["solver"] not in ("auto", "dense_lu", "matrix_free"):
            raise ConfigError(f"key 'solver': got {kv['solver']!r}")
        base_kwargs["solver"] = kv["solver"]
    if "solver_tol" in kv:
        base_kwargs["tol"] = _parse_float("solver_tol", kv["solver_tol"])
    if "solver_max_iter" in kv:
        base_kwargs["max_iter"] = int(_parse_float("solver_max_iter", kv["solver_max_iter"]))
    if "solver_restart" in kv:
        base_kwargs["restart"] = int(_parse_float("solver_restart", kv["solver_restart"]))
    if "precondition" in kv:
        base_kwargs["precondition"] = _parse_bool("precondition", kv["precondition"])
    if "mode" in kv:
        if kv["mode"] not in ("fast", "dense"):
            raise ConfigError(f"key 'mode': expected fast | dense, got {kv['mode']!r}")
        base_kwargs["mode"] = kv["mode"]
    if "snapshot_times" in kv:
        items = [s.strip() for s in kv["snapshot_times"].split(",") if s.strip()]
        base_kwargs["snapshot_times"] = tuple(_parse_float("snapshot_times", s)
                                              for s in items)
    if "formats" in kv:
        fmts = tuple(s.strip() for s in kv["formats"].split(","))
        if any(f not in ("csv", "long") for f in fmts):
            raise ConfigError(f"key 'formats': expected csv and/or long, got {kv['formats']!r}")
        base_kwargs["formats"] = fmts

    swept = [key for key in _SWEEP_KEYS if len(sweeps.get(key, [])) > 1]
    configs: list[tuple[str, ScenarioConfig]] = []
    keys = [k for k in _SWEEP_KEYS if k in sweeps]
    for combo in itertools.product(*(sweeps[k] for k in keys)):
        kwargs = dict(base_kwargs)
        kwargs.update(dict(zip(keys, combo)))
        cfg = _validate(ScenarioConfig(**kwargs))
        parts = []
        for key in swept:
            value = kwargs[key]
            if key == "drift":
                text = "zero" if value.kind == "zero" else f"{value.kind}:{value.slope:g}"
            elif key == "ic":
                text = value.describe()
            elif key == "bc":
                text = value.value
            else:
                text = f"{value:g}"
            parts.append(f"{key}={text.replace(':', '_').replace('/', '_')}")
        configs.append(("_".join(parts), cfg))
    return configs


def _validate(cfg: ScenarioConfig) -> ScenarioConfig:
    try:
        cfg.stable_params()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.J < 4:
        raise ConfigError(f"key 'J': must be >= 4, got {cfg.J}")
    if cfg.dt is not None and cfg.dt <= 0:
        raise ConfigError(f"key 'dt': must be > 0 or 'auto', got {cfg.dt}")
    if cfg.t_final < 0:
        raise ConfigError(f"key 't_final': must be >= 0, got {cfg.t_final}")
    if any(t > cfg.t_final or t < 0 for t in cfg.snapshot_times):
        raise ConfigError("key 'snapshot_times': times must lie in [0, t_final]")
    try:
        cfg.stepper_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


# Built-in experiment recipes.  2 is the exact-density verification; 3-8 are
# the absorbing-domain parameter studies (evolution, skewness, Gaussian and
# Levy noise intensities, domain size, drift); 9 is the most-probable-path
# study.  Two unnumbered extras cover the Gaussian-IC skewness variant and
# the natural-vs-absorbing comparison.
RECIPES: dict[str, str] = {
    "figure2": """\
# Verification against the exact fully-skewed density (natural condition).
alpha = 0.5
beta = 1
epsilon = 1
sigma = 0
b = 10
bc = natural
ic = levy_exact:0.2
J = 1000
dt = auto
t_final = 0.2
snapshot_times = 0.1, 0.2
""",
    "figure3": """\
# Density evolution from a sharp Gaussian, light vs heavy jump activity.
alpha = 0.5, 1.5
beta = 0.5
epsilon = 1
sigma = 0
b = 1
ic = gaussian
J = 200
t_final = 0.5
snapshot_times = 0.1, 0.2, 0.3, 0.5
""",
    "figure4": """\
# Skewness sweep from the uniform initial density.
alpha = 0.5, 1.5
beta = 0, 0.3, 0.7, 1
epsilon = 1
sigma = 0
b = 1
ic = uniform
J = 200
t_final = 0.1
snapshot_times = 0.1
""",
    "figure5": """\
# Gaussian-noise intensity sweep (sigma^2 values).
alpha = 0.5, 1.5
beta = 0.5
epsilon = 1
sigma2 = 0, 0.3, 0.7, 1
b = 1
ic = gaussian
J = 200
t_final = 1
snapshot_times = 0.5, 1
""",
    "figure6": """\
# Levy-noise intensity sweep.
alpha = 0.5, 1.5
beta = 0.5
epsilon = 0.1, 0.3, 0.7, 1
sigma = 0
b = 1
ic = gaussian
J = 200
t_final = 1
snapshot_times = 0.5, 1
""",
    "figure7": """\
# Domain-size sweep under the absorbing condition.
alpha = 0.5, 1.5
beta = 0.5
epsilon = 1
sigma = 0
b = 1, 2, 4
ic = gaussian
J = 200
t_final = 0.2
snapshot_times = 0.2
""",
    "figure8": """\
# Drift sweep: free motion vs the restoring drift -0.6 x.
alpha = 0.5, 1.5
beta = 0.5
epsilon = 1
sigma = 0
b = 1
drift = zero, linear:-0.6
ic = gaussian
J = 200
t_final = 0.2
snapshot_times = 0.2
""",
    "figure9": """\
# Most-probable-path study: two start points, symmetric and skewed noise.
alpha = 0.5
beta = 0, 0.5
epsilon = 1
sigma = 0
b = 1
drift = linear:-0.6
ic = gaussian:0.5:40, gaussian:-0.5:40
J = 400
t_final = 1
snapshot_times = 0.25, 0.5, 0.75, 1
""",
    "timing": """\
# Timing scenario for the fast-vs-dense comparison.
alpha = 0.5
beta = 0.5
epsilon = 1
sigma = 0
b = 1
ic = gaussian
J = 200
dt = 0.000625
t_final = 1
snapshot_times = 1
""",
    "beta_gaussian": """\
# Skewness sweep from the sharp Gaussian initial density.
alpha = 0.5, 1.5
beta = 0, 0.3, 0.7, 1
epsilon = 1
sigma = 0
b = 1
ic = gaussian
J = 200
t_final = 0.1
snapshot_times = 0.1
""",
    "boundary_compare": """\
# Natural vs absorbing condition at two truncation radii.
alpha = 0.5, 1.5
beta = 0.5
epsilon = 1
sigma = 0
b = 1, 5
bc = absorbing, natural
ic = gaussian
J = 200
t_final = 0.2
snapshot_times = 0.2
""",
}

RECIPE_NAMES = tuple(RECIPES)


def figure_recipe(number: int) -> str:
    """Text of the built-in recipe for figure `number` (2 through 9)."""
    name = f"figure{number}"
    if name not in RECIPES:
        raise ConfigError(f"no recipe for figure {number}; available: 2-9")
    return RECIPES[name]


def named_recipe(name: str) -> str:
    if name not in RECIPES:
        raise ConfigError(f"unknown recipe {name!r}; available: {', '.join(RECIPES)}")
    return RECIPES[name]
