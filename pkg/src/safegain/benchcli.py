"""Experiment harness: model files, seeded adversarial runs, flat-file traces.

A model file is a JSON object holding the plant matrices plus default run
parameters; continuous-time models are sampled on load.  ``run_experiment``
drives the online synthesis loop against a configured adversary, simulates
the resulting closed-loop trajectory, and writes three artifacts into the
output directory: ``trace.csv`` (per-step cost rates, regret, envelope and
monitor columns), ``summary.json`` (final figures and derived constants),
and ``config.echo.json`` (the exact configuration replayed).  Runs are
deterministic functions of their configuration.  The click entry point
exposes ``validate``, ``run``, and ``bound`` subcommands with exit code 2
for input problems and 3 for runtime infeasibility.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from enum import Enum
from pathlib import Path

import click
import numpy as np

from .adversary import (
    AttackConfig,
    AttackKind,
    CostPerturbConfig,
    bounded_disturbance,
    dos_disturbance,
    perturbed_costs,
)
from .errors import (
    AssumptionViolation,
    DimensionMismatch,
    HorizonBelowBurnIn,
    InfeasibleInit,
    InvalidInput,
    NonPositiveParameter,
    ParseError,
    SafegainError,
    SchemaError,
    SolverFailure,
    StateOverflow,
)
from .numkernel import operator_norm, spectral_radius
from .online import (
    OnlineConfig,
    RegretTrace,
    _bound_value,
    bound_constants,
    counterfactual_optimum,
    init,
    step,
)
from .riccati import h2_bootstrap_gain, solve_stationary
from .sysmodel import STATE_OVERFLOW_LIMIT, LtiSystem, is_valid_controller, zoh_discretize
from .validation import as_matrix, check_positive

TRACE_COLUMNS = (
    "t",
    "J",
    "J_star",
    "regret",
    "regret_norm",
    "bound",
    "pdiff",
    "specrad",
    "hinf",
    "nu",
)
_MODEL_FIELDS = (
    "name",
    "continuous",
    "dt",
    "A",
    "B",
    "C",
    "D",
    "E",
    "gamma",
    "mu",
    "sigma",
    "w_max",
)
_MODELS_DIR = Path(__file__).parent / "models"


@dataclass(frozen=True)
class ModelParams:
    """Scalar run defaults carried alongside the plant in a model file."""

    name: str
    continuous: bool
    dt: float
    gamma: float
    mu: float
    sigma: float
    w_max: float


def bundled_model_path(name: str) -> Path:
    path = _MODELS_DIR / f"{name}.json"
    if not path.exists():
        known = sorted(p.stem for p in _MODELS_DIR.glob("*.json"))
        raise ParseError(f"no bundled model {name!r}; available: {known}")
    return path


def load_model(path) -> tuple[LtiSystem, ModelParams]:
    """Parse, validate, and (if continuous) sample a model file.

    The disturbance matrix D is always interpreted in discrete time and
    passed through sampling unchanged, so identity-channel attack semantics
    survive discretization; only A and B are resampled.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read model file {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: top level must be an object")
    missing = [k for k in _MODEL_FIELDS if k not in raw]
    if missing:
        raise SchemaError(f"{path}: missing fields {missing}")
    extra = sorted(set(raw) - set(_MODEL_FIELDS))
    if extra:
        raise SchemaError(f"{path}: unknown fields {extra}")
    if not isinstance(raw["name"], str):
        raise SchemaError(f"{path}: name must be a string")
    if not isinstance(raw["continuous"], bool):
        raise SchemaError(f"{path}: continuous must be a boolean")
    scalars = {}
    for key in ("dt", "gamma", "mu", "sigma", "w_max"):
        try:
            scalars[key] = float(raw[key])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: {key} must be a real number") from exc
    if not (math.isfinite(scalars["dt"]) and scalars["dt"] > 0.0):
        raise SchemaError(f"{path}: dt must be positive")
    mats = {}
    for key in ("A", "B", "C", "D", "E"):
        try:
            mats[key] = as_matrix(np.array(raw[key], dtype=float), key)
        except (TypeError, ValueError, InvalidInput) as exc:
            raise SchemaError(f"{path}: field {key}: {exc}") from exc
    A, B, D = mats["A"], mats["B"], mats["D"]
    if raw["continuous"]:
        A, B, _ = zoh_discretize(A, B, D, scalars["dt"])
    try:
        sys_ = LtiSystem(A=A, B=B, D=D, C=mats["C"], E=mats["E"])
    except AssumptionViolation:
        raise
    except DimensionMismatch as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    # stabilizability gate with neutral weights; raises UnstabilizableModel
    h2_bootstrap_gain(sys_.A, sys_.B, np.eye(sys_.n_states), np.eye(sys_.n_inputs))
    params = ModelParams(
        name=raw["name"],
        continuous=raw["continuous"],
        dt=scalars["dt"],
        gamma=scalars["gamma"],
        mu=scalars["mu"],
        sigma=scalars["sigma"],
        w_max=scalars["w_max"],
    )
    return sys_, params


def write_model(path, name, A, B, C, D, E, *, continuous, dt, gamma, mu, sigma, w_max):
    """Serialize a model to the JSON schema; floats round-trip bit-exact."""
    payload = {
        "name": str(name),
        "continuous": bool(continuous),
        "dt": float(dt),
        "A": np.asarray(A, dtype=float).tolist(),
        "B": np.asarray(B, dtype=float).tolist(),
        "C": np.asarray(C, dtype=float).tolist(),
        "D": np.asarray(D, dtype=float).tolist(),
        "E": np.asarray(E, dtype=float).tolist(),
        "gamma": float(gamma),
        "mu": float(mu),
        "sigma": float(sigma),
        "w_max": float(w_max),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


# --- experiment configuration ----------------------------------------------------


@dataclass(frozen=True)
class StationarySeed:
    """Start from the stationary solve of the first revealed cost pair."""

    gamma_init: float | None = None  # None: reuse the experiment's gamma


@dataclass(frozen=True)
class FileSeed:
    """Start from a gain stored as a JSON nested list."""

    path: str


def default_trace_stride(horizon: int) -> int:
    return 1 if horizon <= 1000 else 10


@dataclass(frozen=True)
class ExperimentConfig:
    model_path: str
    horizon: int
    attack: AttackConfig
    cost_perturb: CostPerturbConfig
    gamma: float
    mu: float
    sigma: float
    out_dir: str
    seed: int = 0
    m: float = 1.0
    k1_source: StationarySeed | FileSeed = StationarySeed()
    trace_stride: int | None = None
    nu_init: float = 0.0

    def __post_init__(self):
        if int(self.horizon) < 2:
            raise NonPositiveParameter(f"horizon must be at least 2, got {self.horizon}")
        check_positive(self.gamma, "gamma")
        check_positive(self.mu, "mu")
        check_positive(self.sigma, "sigma")
        check_positive(self.m, "m")
        if not Path(self.model_path).exists():
            raise ParseError(f"model file not found: {self.model_path}")
        if isinstance(self.k1_source, FileSeed) and not Path(self.k1_source.path).exists():
            raise ParseError(f"gain file not found: {self.k1_source.path}")
        stride = self.trace_stride
        stride = default_trace_stride(int(self.horizon)) if stride is None else int(stride)
        if stride < 1:
            raise NonPositiveParameter(f"trace_stride must be positive, got {stride}")
        object.__setattr__(self, "trace_stride", stride)
        object.__setattr__(self, "horizon", int(self.horizon))


def _emit_times(horizon: int, stride: int) -> list[int]:
    times = list(range(stride, horizon + 1, stride))
    if not times or times[-1] != horizon:
        times.append(horizon)
    return times


def _resolve_k1(cfg: ExperimentConfig, sys_: LtiSystem, Q_1, R_1) -> np.ndarray:
    src = cfg.k1_source
    if isinstance(src, FileSeed):
        K_1 = as_matrix(np.array(json.loads(Path(src.path).read_text()), dtype=float), "K_1")
        report = is_valid_controller(sys_, K_1, cfg.gamma)
        if not report.valid:
            raise InfeasibleInit(
                f"gain from {src.path} is outside the admissible set "
                f"(spectral radius {report.spectral_radius:.4f}, peak gain {report.hinf:.4f})"
            )
        return K_1
    gamma_init = cfg.gamma if src.gamma_init is None else float(src.gamma_init)
    seed_gain = h2_bootstrap_gain(sys_.A, sys_.B, Q_1, R_1)
    K_1, _ = solve_stationary(sys_, Q_1, R_1, gamma_init, seed_gain)
    return K_1


def _json_clean(obj):
    """Recursively make a payload strict-JSON safe (no NaN/Inf, no numpy)."""
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(_json_clean(payload), indent=2, sort_keys=True) + "\n")


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_trace_csv(path: Path, trace: RegretTrace, state, nus, emit, regret_ref) -> None:
    lines = [",".join(TRACE_COLUMNS)]
    for t in emit:
        if t > len(trace):
            break  # partial flush after a failed step
        i = t - 1
        row = state.history[i]
        norm = math.nan
        if math.isfinite(regret_ref) and regret_ref != 0.0:
            norm = trace.regret[i] / regret_ref
        lines.append(
            ",".join(
                [
                    str(t),
                    _fmt(trace.j[i]),
                    _fmt(trace.j_star[i]),
                    _fmt(trace.regret[i]),
                    _fmt(norm),
                    _fmt(trace.bound[i]),
                    _fmt(trace.pdiff[i]),
                    _fmt(row.specrad),
                    _fmt(row.hinf),
                    _fmt(nus[i]),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n")


def _record(trace: RegretTrace, state, t: int, emit_set, sys_: LtiSystem) -> None:
    row = state.history[-1]
    j_star = math.nan
    if t in emit_set:
        _, j_star = counterfactual_optimum(sys_, state.Qbar, state.Rbar, state.gamma, state.K)
    trace.append_row(t, row.j, j_star=j_star, pdiff=row.pdiff)


def run_experiment(cfg: ExperimentConfig) -> tuple[RegretTrace, dict]:
    """Run one seeded experiment end to end and write its artifacts.

    Raises the underlying solver/input error annotated with the failing
    step index; whatever trace rows exist by then are flushed first.
    """
    sys_, params = load_model(cfg.model_path)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.echo.json", asdict(cfg))

    pcfg, acfg = cfg.cost_perturb, cfg.attack
    T, stride = cfg.horizon, cfg.trace_stride
    emit = _emit_times(T, stride)
    emit_set = set(emit)
    dos = acfg.kind is AttackKind.DENIAL_OF_SERVICE

    trace = RegretTrace()
    nus: list[float] = []
    state = None
    drift_max = 0.0 if dos else math.nan
    current_t = 1
    try:
        Q_1, R_1 = perturbed_costs(pcfg, sys_.Q, sys_.R, 1)
        K_1 = _resolve_k1(cfg, sys_, Q_1, R_1)
        ocfg = OnlineConfig(
            mu=cfg.mu, sigma=cfg.sigma, m=cfg.m, nu_init=cfg.nu_init, monitor_stride=stride
        )
        state = init(sys_, Q_1, R_1, cfg.gamma, K_1, ocfg)
        _record(trace, state, 1, emit_set, sys_)
        nus.append(state.constants.nu)

        x = np.zeros(sys_.n_states)
        u = -K_1 @ x
        w = (
            dos_disturbance(acfg, 1, sys_.B, u, D=sys_.D)
            if dos
            else bounded_disturbance(acfg, 1, sys_.n_disturbances)
        )
        x = sys_.A @ x + (sys_.B @ u + sys_.D @ w)
        for t in range(2, T + 1):
            current_t = t
            gain_t = state.K  # committed at the end of step t-1, active now
            Q_t, R_t = perturbed_costs(pcfg, sys_.Q, sys_.R, t)
            step(state, Q_t, R_t)
            _record(trace, state, t, emit_set, sys_)
            nus.append(state.constants.nu)

            u = -gain_t @ x
            w = (
                dos_disturbance(acfg, t, sys_.B, u, D=sys_.D)
                if dos
                else bounded_disturbance(acfg, t, sys_.n_disturbances)
            )
            push = sys_.B @ u + sys_.D @ w
            if dos and acfg.in_window(t):
                drift_max = max(drift_max, float(np.linalg.norm(push)))
            x = sys_.A @ x + push
            peak = float(np.abs(x).max())
            if not math.isfinite(peak) or peak > STATE_OVERFLOW_LIMIT:
                raise StateOverflow(f"simulated state reached {peak:.3e}")
    except SafegainError as exc:
        _write_trace_csv(out / "trace.csv", trace, state, nus, emit, math.nan)
        raise type(exc)(f"at step {current_t}: {exc}") from exc

    constants = bound_constants(
        cfg.mu, state.constants.nu, cfg.sigma, operator_norm(sys_.B), m=state.m_hat
    )
    t_burn = math.ceil(constants.t_star)
    trace_dd = float(np.sum(sys_.D * sys_.D))
    for t in emit:
        if t >= t_burn:
            trace.bound[t - 1] = _bound_value(constants, trace_dd, t)
    regret_ref = math.nan
    for t in emit:
        if t >= t_burn:
            regret_ref = trace.regret[t - 1]
            break
    _write_trace_csv(out / "trace.csv", trace, state, nus, emit, regret_ref)

    violations = sum(
        (row.specrad >= 1.0) + (math.isfinite(row.hinf) and row.hinf >= cfg.gamma)
        for row in state.history
    )
    summary = {
        "model": params.name,
        "model_path": str(cfg.model_path),
        "horizon": T,
        "trace_stride": stride,
        "seed": cfg.seed,
        "attack": acfg.kind.value,
        "gamma": cfg.gamma,
        "mu": cfg.mu,
        "sigma": cfg.sigma,
        "m_config": cfg.m,
        "m_hat": state.m_hat,
        "kappa": constants.kappa,
        "epsilon": constants.epsilon,
        "t_star": constants.t_star,
        "p_star": constants.p_star,
        "nu_final": constants.nu,
        "b_norm": operator_norm(sys_.B),
        "trace_dd": trace_dd,
        "j_initial": trace.j[0],
        "regret_final": trace.regret[-1],
        "bound_final": trace.bound[-1],
        "violations": int(violations),
        "recompute_count": len(state.recompute_log),
        "dos_drift_max": drift_max,
    }
    _write_json(out / "summary.json", summary)
    return trace, summary


def emit_bound_curve(summary: dict, out_path=None) -> list[tuple[float, float]]:
    """Envelope curve from a completed run's summary; rows (t, bound).

    The first row sits exactly at the (generally fractional) burn-in step,
    the rest on integer steps up to the horizon.
    """
    required = ("mu", "sigma", "nu_final", "m_hat", "b_norm", "trace_dd", "horizon")
    missing = [k for k in required if k not in summary]
    if missing:
        raise SchemaError(f"summary is missing fields {missing}")
    constants = bound_constants(
        summary["mu"],
        summary["nu_final"],
        summary["sigma"],
        summary["b_norm"],
        m=summary["m_hat"],
    )
    T = int(summary["horizon"])
    trace_dd = float(summary["trace_dd"])
    ts = constants.t_star
    if T < ts:
        raise HorizonBelowBurnIn(
            f"horizon {T} is below the burn-in step {ts:.6g}; nothing to emit"
        )
    times: list[float] = [ts]
    start = math.ceil(ts)
    if start == ts:
        start += 1
    times.extend(float(t) for t in range(int(start), T + 1))
    rows = [(t, _bound_value(constants, trace_dd, t)) for t in times]
    if out_path is not None:
        lines = ["t,bound"] + [f"{_fmt(t)},{_fmt(b)}" for t, b in rows]
        Path(out_path).write_text("\n".join(lines) + "\n")
    return rows


# --- command line ----------------------------------------------------------------


def _guarded(body):
    try:
        return body()
    except InvalidInput as exc:
        click.echo(f"error: {exc}", err=True)
        raise SystemExit(2)
    except SolverFailure as exc:
        click.echo(f"error: {exc}", err=True)
        raise SystemExit(3)


@click.group()
def main():
    """Benchmark harness for online disturbance-attenuating gain synthesis."""


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path())
def validate(model_path):
    """Load a model file and report its shape and defaults."""

    def body():
        sys_, params = load_model(model_path)
        click.echo(
            f"{params.name}: {sys_.n_states} states, {sys_.n_inputs} inputs, "
            f"{sys_.n_outputs} outputs, {sys_.n_disturbances} disturbances"
            + (f" (continuous, dt={params.dt:g})" if params.continuous else "")
        )
        click.echo(f"open-loop spectral radius: {spectral_radius(sys_.A):.6f}")
        click.echo(
            f"defaults: gamma={params.gamma:g} mu={params.mu:g} "
            f"sigma={params.sigma:g} w_max={params.w_max:g}"
        )
        click.echo("OK")

    _guarded(body)


def _run_one(cfg: ExperimentConfig) -> dict:
    return run_experiment(cfg)[1]


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--horizon", type=int, required=True)
@click.option("--attack", type=click.Choice(["arbitrary", "dos"]), required=True)
@click.option("--dos-start", type=int, default=None)
@click.option("--dos-end", type=int, default=None)
@click.option("--gamma", type=float, required=True)
@click.option("--mu", type=float, required=True)
@click.option("--sigma", type=float, required=True)
@click.option("--m", "m_const", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--replicas", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--w-max", type=float, default=None, help="default: model file value")
@click.option("--delta", type=float, default=0.1, show_default=True)
@click.option("--gamma-init", type=float, default=None, help="default: --gamma")
@click.option("--trace-stride", type=int, default=None, help="default: 1, or 10 past 1000 steps")
@click.option("--nu-init", type=float, default=0.0, show_default=True)
def run(
    model_path,
    horizon,
    attack,
    dos_start,
    dos_end,
    gamma,
    mu,
    sigma,
    m_const,
    seed,
    replicas,
    out_dir,
    w_max,
    delta,
    gamma_init,
    trace_stride,
    nu_init,
):
    """Run seeded experiments and write trace/summary files."""

    def body():
        _, params = load_model(model_path)
        kind = AttackKind.ARBITRARY if attack == "arbitrary" else AttackKind.DENIAL_OF_SERVICE
        radius = params.w_max if w_max is None else w_max
        window = None
        if kind is AttackKind.DENIAL_OF_SERVICE:
            start = max(2, horizon // 4) if dos_start is None else dos_start
            end = max(start, horizon // 2) if dos_end is None else dos_end
            window = (start, end)
        if replicas < 1:
            raise NonPositiveParameter(f"replicas must be positive, got {replicas}")
        base = Path(out_dir)
        configs = []
        for i in range(replicas):
            run_seed = seed + i
            run_dir = base / f"replica-{i:03d}" if replicas > 1 else base
            configs.append(
                ExperimentConfig(
                    model_path=model_path,
                    horizon=horizon,
                    attack=AttackConfig(kind=kind, w_max=radius, seed=run_seed, dos_window=window),
                    cost_perturb=CostPerturbConfig(delta=delta, mu=mu, sigma=sigma, seed=run_seed),
                    gamma=gamma,
                    mu=mu,
                    sigma=sigma,
                    out_dir=str(run_dir),
                    seed=run_seed,
                    m=m_const,
                    k1_source=StationarySeed(gamma_init=gamma_init),
                    trace_stride=trace_stride,
                    nu_init=nu_init,
                )
            )
        if replicas == 1:
            summaries = [_run_one(configs[0])]
        else:
            with ProcessPoolExecutor(max_workers=min(replicas, 8)) as pool:
                summaries = list(pool.map(_run_one, configs))
        for cfg, summary in zip(configs, summaries):
            click.echo(
                f"{cfg.out_dir}: regret={summary['regret_final']:.6g} "
                f"bound={summary['bound_final'] if summary['bound_final'] is not None else float('nan'):.6g} "
                f"violations={summary['violations']}"
            )

    _guarded(body)


@main.command()
@click.option("--summary", "summary_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
def bound(summary_path, out_path):
    """Emit the (t, bound) envelope curve for a finished run."""

    def body():
        try:
            payload = json.loads(Path(summary_path).read_text())
        except OSError as exc:
            raise ParseError(f"cannot read summary {summary_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ParseError(f"{summary_path} is not valid JSON: {exc}") from exc
        rows = emit_bound_curve(payload, out_path)
        click.echo(f"wrote {len(rows)} rows to {out_path}")

    _guarded(body)


if __name__ == "__main__":
    main()
