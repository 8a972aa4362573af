"""Maximum-likelihood fitting, observed-information standard errors and holdout prediction."""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .baselines import MCBase, SCBase, SampledChoiceSet, build_sampled_choice_set
from .core import ItemUniverse, Observation
from .dag import variant_name
from .errors import ConfigurationError, ModelError
from .nested import NestedRecursiveLogit, ScaleSpec
from .recursive_logit import RecursiveLogit, group_by_bounds

FAMILIES = ("lmdc", "nested", "sc-base", "mc-base")
REPORT_KEYS = (
    "model", "parameter_names", "estimates", "std_errors", "t_stats", "final_ll",
    "iterations", "converged", "timing_seconds", "gradient_max_norm", "n_observations",
    "message", "se_diagnostic", "ll_trace",
)


@dataclass(frozen=True)
class ModelSpec:
    family: str = "lmdc"
    dag: str = "bic"
    count_mode: bool = False
    scale_spec: ScaleSpec = ScaleSpec()
    mu: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown model family {self.family!r}; choose from {FAMILIES}")
        if self.dag not in ("bic", "muc"):
            raise ConfigurationError(f"unknown dag {self.dag!r}")
        if self.family == "nested" and self.scale_spec.size == 0:
            raise ConfigurationError("nested model needs at least one scale attribute")
        if self.family != "nested" and self.scale_spec.size:
            raise ConfigurationError(f"scale attributes only apply to the nested model, not {self.family}")
        if not (self.mu > 0 and np.isfinite(self.mu)):
            raise ConfigurationError("mu must be positive")

    @property
    def variant(self) -> str:
        return variant_name(self.dag, self.count_mode)

    @property
    def label(self) -> str:
        if self.family in ("lmdc", "nested"):
            return f"{self.family}-{self.variant}"
        return self.family


@dataclass(frozen=True)
class FitOptions:
    tol: float = 1e-6
    max_iter: int = 500
    n_starts: Optional[int] = None  # default: 3 for nested, 1 otherwise
    init_scale: float = 0.1
    seed: int = 0
    threads: int = 1
    polish_steps: int = 25
    compute_se: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigurationError("tol must be positive")
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be at least 1")


@dataclass
class EstimationReport:
    model: str
    parameter_names: list
    estimates: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    final_ll: float
    iterations: int
    converged: bool
    timing_seconds: float
    gradient_max_norm: float
    n_observations: int
    message: str = ""
    se_diagnostic: str = ""
    ll_trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        def clean(a):
            return [None if not np.isfinite(v) else float(v) for v in np.asarray(a, dtype=float)]

        d = {
            "model": self.model,
            "parameter_names": list(self.parameter_names),
            "estimates": clean(self.estimates),
            "std_errors": clean(self.std_errors),
            "t_stats": clean(self.t_stats),
            "final_ll": float(self.final_ll),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "timing_seconds": float(self.timing_seconds),
            "gradient_max_norm": float(self.gradient_max_norm),
            "n_observations": int(self.n_observations),
            "message": self.message,
            "se_diagnostic": self.se_diagnostic,
            "ll_trace": [float(v) for v in self.ll_trace],
        }
        return {k: d[k] for k in REPORT_KEYS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def table(self) -> str:
        w = max([len("Parameter")] + [len(n) for n in self.parameter_names])
        lines = [f"{'Parameter':<{w}}  {'Estimate':>10}  {'Std. Err.':>10}  {'t-test(0)':>10}"]
        for n, b, s, t in zip(self.parameter_names, self.estimates, self.std_errors, self.t_stats):
            lines.append(f"{n:<{w}}  {b:>10.4f}  {s:>10.4f}  {t:>10.2f}")
        lines.append(f"Final LL: {self.final_ll:.4f}   converged: {self.converged}   "
                     f"iterations: {self.iterations}   time: {self.timing_seconds:.2f}s")
        return "\n".join(lines)


def parameter_names(spec: ModelSpec, universe: ItemUniverse) -> list:
    names = [f"beta_{a}" for a in universe.attribute_names]
    if spec.family == "nested":
        names += [f"gamma_{s}" for s in spec.scale_spec.selectors]
    return names


def build_model(spec: ModelSpec, universe: ItemUniverse, observations: Sequence[Observation],
                choice_set: Optional[SampledChoiceSet] = None, threads: int = 1, dags: Optional[dict] = None):
    """Likelihood object exposing ``n_params``, ``loglik`` and ``loglik_and_grad``."""
    if spec.family == "lmdc":
        return RecursiveLogit(universe, observations, spec.variant, spec.mu, dags, threads)
    if spec.family == "nested":
        if spec.mu != 1.0:
            raise ConfigurationError("the nested model carries its own scales; mu must stay 1")
        return NestedRecursiveLogit(universe, observations, spec.variant, spec.scale_spec, dags)
    if spec.family == "sc-base":
        return SCBase(universe, observations, spec.mu)
    return MCBase(universe, observations, choice_set, spec.mu)


def numerical_hessian(model, theta, rel_step: float = 1e-4) -> np.ndarray:
    """Central differences of the analytic gradient, symmetrised."""
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    H = np.zeros((n, n))
    for q in range(n):
        h = rel_step * max(1.0, abs(theta[q]))
        e = np.zeros(n)
        e[q] = h
        H[:, q] = (model.loglik_and_grad(theta + e)[1] - model.loglik_and_grad(theta - e)[1]) / (2 * h)
    return 0.5 * (H + H.T)


def standard_errors(model, theta, rel_step: float = 1e-4):
    """Square roots of the diagonal of the inverse observed information.

    Returns ``(std_errors, diagnostic)``; a non positive-definite information
    matrix yields NaN errors and a non-empty diagnostic.
    """
    info = -numerical_hessian(model, theta, rel_step)
    try:
        chol = np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(info)
        return (np.full(len(theta), np.nan),
                f"information matrix not positive definite (min eigenvalue {eig.min():.3e})")
    inv_chol = np.linalg.solve(chol, np.eye(len(theta)))
    cov = inv_chol.T @ inv_chol
    return np.sqrt(np.diag(cov)), ""


def _polish(model, theta, ll, grad, tol, steps, trace):
    """Newton steps on the numerical Hessian with backtracking.

    A step is taken if it raises LL, or if LL is unchanged up to rounding and
    the gradient shrinks; near the optimum LL is flat at float resolution.
    """
    done = 0
    for _ in range(steps):
        if np.max(np.abs(grad)) <= tol:
            break
        H = numerical_hessian(model, theta)
        direction = -np.linalg.lstsq(H, grad, rcond=None)[0]
        if not np.all(np.isfinite(direction)) or direction @ grad <= 0:
            direction = grad
        t = 1.0
        while t > 1e-10:
            cand = theta + t * direction
            c_ll, c_grad = model.loglik_and_grad(cand)
            if np.isfinite(c_ll) and (c_ll > ll or (
                    c_ll >= ll - 64 * np.finfo(float).eps * abs(ll)
                    and np.max(np.abs(c_grad)) < np.max(np.abs(grad)))):
                break
            t *= 0.5
        else:
            break
        theta, ll, grad = cand, c_ll, c_grad
        trace.append(ll)
        done += 1
    return theta, ll, grad, done


def _single_fit(model, init, options: FitOptions):
    trace = []

    def objective(theta):
        ll, g = model.loglik_and_grad(theta)
        if not np.isfinite(ll):
            return np.inf, np.zeros_like(theta)
        return -ll, -g

    def callback(intermediate_result):
        trace.append(-float(intermediate_result.fun))

    ll0, g0 = model.loglik_and_grad(init)
    if not np.isfinite(ll0) or not np.all(np.isfinite(g0)):
        raise ModelError("log-likelihood is not finite at the initial parameters")
    trace.append(float(ll0))
    res = minimize(objective, init, jac=True, method="L-BFGS-B", callback=callback,
                   options={"maxiter": options.max_iter, "gtol": options.tol, "ftol": 1e-15,
                            "maxcor": 20, "maxls": 40})
    theta = res.x
    ll, grad = model.loglik_and_grad(theta)
    if ll < ll0:
        theta, ll, grad = np.asarray(init, dtype=float), ll0, g0
    budget = min(options.polish_steps, max(0, options.max_iter - int(res.nit)))
    theta, ll, grad, extra = _polish(model, theta, ll, grad, options.tol, budget, trace)
    return theta, float(ll), grad, int(res.nit) + extra, str(res.message), trace


def fit(model_spec: ModelSpec, universe: ItemUniverse, observations: Sequence[Observation],
        init=None, options: Optional[FitOptions] = None,
        choice_set: Optional[SampledChoiceSet] = None) -> EstimationReport:
    """Maximise the log-likelihood of ``model_spec`` on ``observations``."""
    options = options or FitOptions()
    start = time.perf_counter()
    if model_spec.family == "mc-base" and choice_set is None:
        choice_set = build_sampled_choice_set(observations)
    model = build_model(model_spec, universe, observations, choice_set, options.threads)
    n = model.n_params
    inits = [np.zeros(n) if init is None else np.asarray(init, dtype=float)]
    if inits[0].shape != (n,):
        raise ConfigurationError(f"init has shape {inits[0].shape}, model needs ({n},)")
    n_starts = options.n_starts or (3 if model_spec.family == "nested" else 1)
    rng = np.random.default_rng(options.seed)
    for _ in range(n_starts - 1):
        inits.append(inits[0] + options.init_scale * rng.standard_normal(n))

    best = None
    for x0 in inits:
        try:
            run = _single_fit(model, x0, options)
        except ModelError:
            if best is None and x0 is inits[-1]:
                raise
            continue
        if best is None or run[1] > best[1]:
            best = run
    if best is None:
        raise ModelError("no start produced a finite log-likelihood")
    theta, ll, grad, iterations, message, trace = best
    gmax = float(np.max(np.abs(grad))) if n else 0.0
    converged = bool(np.isfinite(ll) and gmax <= options.tol)

    if options.compute_se:
        se, diag = standard_errors(model, theta)
    else:
        se, diag = np.full(n, np.nan), "not computed"
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(se > 0, theta / se, np.nan)
    return EstimationReport(
        model=model_spec.label,
        parameter_names=parameter_names(model_spec, universe),
        estimates=theta,
        std_errors=se,
        t_stats=t_stats,
        final_ll=ll,
        iterations=iterations,
        converged=converged,
        timing_seconds=time.perf_counter() - start,
        gradient_max_norm=gmax,
        n_observations=len(observations),
        message=message,
        se_diagnostic=diag,
        ll_trace=trace,
    )


# -- prediction -----------------------------------------------------------------


def _holdout_model(model_spec: ModelSpec, universe, holdout, dags=None, threads: int = 1):
    if model_spec.family == "nested":
        return NestedRecursiveLogit(universe, holdout, model_spec.variant, model_spec.scale_spec, dags)
    return RecursiveLogit(universe, holdout, model_spec.variant, model_spec.mu, dags, threads)


def predict_loglik_obs(model_spec: ModelSpec, params, holdout: Sequence[Observation],
                       universe: ItemUniverse, dags: Optional[dict] = None) -> np.ndarray:
    """Per-observation LL under the universal choice set.

    Utility-only families (lmdc, sc-base, mc-base) are all scored with the
    recursive-logit likelihood; the nested family keeps its own scales.
    """
    if not holdout:
        return np.zeros(0)
    params = np.asarray(params, dtype=float)
    return _holdout_model(model_spec, universe, holdout, dags).loglik_obs(params)


def predict_loglik(model_spec: ModelSpec, params, holdout: Sequence[Observation],
                   universe: ItemUniverse, dags: Optional[dict] = None) -> float:
    """Average per-observation holdout LL; 0 (with a warning) for an empty holdout."""
    if not holdout:
        warnings.warn("empty holdout set; average log-likelihood defined as 0", RuntimeWarning)
        return 0.0
    return float(np.mean(predict_loglik_obs(model_spec, params, holdout, universe, dags)))


def predict_by_group(model_spec: ModelSpec, params, holdout: Sequence[Observation],
                     universe: ItemUniverse, dags: Optional[dict] = None) -> dict:
    """Bounds -> (count, average LL), in bounds order."""
    ll = predict_loglik_obs(model_spec, params, holdout, universe, dags)
    return {b: (len(idx), float(ll[idx].mean())) for b, idx in group_by_bounds(list(holdout)).items()}


def zero_probability_count(choice_set: SampledChoiceSet, holdout: Sequence[Observation]) -> int:
    """Holdout observations that a sampled choice set would score with probability 0."""
    return sum(o not in choice_set for o in holdout)
