"""Linear-SEM scenario generator, analytic truth oracle, and replication harness.

The data-generating model, in topological order (coefficients below are the
defaults; every scenario uses the subset of variables it declares):

    R ~ Bernoulli(p_r)                                  group indicator
    C = 1.0 - 0.5 R + N(0, 1)                           baseline covariate
    U ~ N(0, 1)                                         unmeasured confounder
    X_k = 0.4 R + 0.2 C + lam_x U + N(0, 1), k = 1..3   intermediate covariates
    M = 1 - 0.6 R + 0.1 C + 0.2 sum(X) + lam_m U + N(0, 1)
    Y = 0.5 R + 0.3 C + 0.25 sum(X) + 0.4 M + lam_y U + N(0, 1)

Scenario tags select which variables exist and which confounder loadings
may be nonzero (active loadings default to 0.5):

    none     no C, no X, no U
    c-only   C only
    x-only   X only
    cx       C and X
    xm-conf  C, X, and U loading on X and M (collider structure)
    my-conf  C, X, and U loading on M and Y (mediator-outcome confounding)
    both     C, X, and U loading on X, M, and Y

Truths come from closed-form moment propagation, never from sampling: the
implied means/covariances give population regression projections for the
pooled and group-specific models, and the structural equations give the
conditional-expectation estimands for the causal decomposition. Because
estimator targets are defined by each method's own assumptions, the truth
oracle evaluates projections on the confounder-free twin of the
configuration (loadings zeroed, all else identical); for unconfounded
scenarios the twin is the scenario itself, and the causal estimands are
identical either way since the confounder is mean-zero and independent of
the group and baseline variables.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from ._streams import stream_seed, substream
from .decompose import (
    CdaSettings,
    DecompositionResult,
    decompose_cda,
    decompose_dic,
    decompose_kob,
)
from .regress import EstimationError
from .sensitivity import SensitivityParams, adjust
from .tabular import DataError, Dataset, RoleSpec

__all__ = [
    "SCENARIOS",
    "BaselineEquation",
    "IntermediateEquation",
    "MediatorEquation",
    "OutcomeEquation",
    "SemCoefficients",
    "ScenarioConfig",
    "MethodTruth",
    "TrueValues",
    "CellSummary",
    "SimulationReport",
    "default_coefficients",
    "config_from_json",
    "generate",
    "compute_truths",
    "baseline_pathway_contribution",
    "intermediate_pathway_contribution",
    "oracle_sensitivity_params",
    "oracle_explained_bias",
    "run_harness",
]

SCENARIOS = ("none", "c-only", "x-only", "cx", "xm-conf", "my-conf", "both")

ACTIVE_LOADING = 0.5

HARNESS_METHODS = ("DIC", "KOB", "CDA")
ADJUSTED_METHOD = "CDA_adjusted"


def scenario_has_baseline(scenario: str) -> bool:
    return scenario != "none" and scenario != "x-only"


def scenario_has_intermediate(scenario: str) -> bool:
    return scenario != "none" and scenario != "c-only"


def scenario_has_confounder(scenario: str) -> bool:
    return scenario in ("xm-conf", "my-conf", "both")


@dataclass(frozen=True)
class BaselineEquation:
    intercept: float = 1.0
    on_group: float = -0.5
    noise_sd: float = 1.0


@dataclass(frozen=True)
class IntermediateEquation:
    intercept: float = 0.0
    on_group: float = 0.4
    on_baseline: float = 0.2
    on_confounder: float = 0.0
    noise_sd: float = 1.0


@dataclass(frozen=True)
class MediatorEquation:
    intercept: float = 1.0
    on_group: float = -0.6
    on_baseline: float = 0.1
    on_intermediate: tuple[float, ...] = (0.2, 0.2, 0.2)
    on_confounder: float = 0.0
    noise_sd: float = 1.0


@dataclass(frozen=True)
class OutcomeEquation:
    intercept: float = 0.0
    on_group: float = 0.5
    on_baseline: float = 0.3
    on_intermediate: tuple[float, ...] = (0.25, 0.25, 0.25)
    on_mediator: float = 0.4
    on_confounder: float = 0.0
    noise_sd: float = 1.0


@dataclass(frozen=True)
class SemCoefficients:
    """Structural coefficients; the confounder is always standard normal."""

    p_r: float = 0.5
    baseline: BaselineEquation = BaselineEquation()
    intermediate: tuple[IntermediateEquation, ...] = (
        IntermediateEquation(),
        IntermediateEquation(),
        IntermediateEquation(),
    )
    mediator: MediatorEquation = MediatorEquation()
    outcome: OutcomeEquation = OutcomeEquation()

    def __post_init__(self) -> None:
        object.__setattr__(self, "intermediate", tuple(self.intermediate))
        object.__setattr__(
            self, "mediator", replace(self.mediator, on_intermediate=tuple(self.mediator.on_intermediate))
        )
        object.__setattr__(
            self, "outcome", replace(self.outcome, on_intermediate=tuple(self.outcome.on_intermediate))
        )
        if not 0.0 < self.p_r < 1.0:
            raise ValueError(f"p_r must be in (0,1), got {self.p_r}")
        sds = (
            [self.baseline.noise_sd, self.mediator.noise_sd, self.outcome.noise_sd]
            + [eq.noise_sd for eq in self.intermediate]
        )
        for sd in sds:
            if not sd > 0.0:
                raise ValueError(f"noise sds must be > 0, got {sd}")
        k = len(self.intermediate)
        if len(self.mediator.on_intermediate) != k or len(self.outcome.on_intermediate) != k:
            raise ValueError(
                "mediator/outcome on_intermediate lengths must match the "
                f"number of intermediate equations ({k})"
            )


def default_coefficients(scenario: str) -> SemCoefficients:
    """Default coefficient set with the scenario's active confounder loadings."""
    coefs = SemCoefficients()
    if scenario in ("xm-conf", "both"):
        coefs = replace(
            coefs,
            intermediate=tuple(
                replace(eq, on_confounder=ACTIVE_LOADING) for eq in coefs.intermediate
            ),
        )
    if scenario_has_confounder(scenario):
        coefs = replace(coefs, mediator=replace(coefs.mediator, on_confounder=ACTIVE_LOADING))
    if scenario in ("my-conf", "both"):
        coefs = replace(coefs, outcome=replace(coefs.outcome, on_confounder=ACTIVE_LOADING))
    return coefs


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    n: int = 2000
    reps: int = 200
    seed: int = 0
    coefficients: SemCoefficients | None = None

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}, expected one of {SCENARIOS}")
        if self.n < 50:
            raise ValueError(f"n must be >= 50, got {self.n}")
        if self.reps < 1:
            raise ValueError(f"reps must be >= 1, got {self.reps}")
        if self.coefficients is None:
            object.__setattr__(self, "coefficients", default_coefficients(self.scenario))
        self._check_loadings()

    def _check_loadings(self) -> None:
        coefs = self.coefficients
        assert coefs is not None
        lam_x_ok = self.scenario in ("xm-conf", "both")
        lam_m_ok = scenario_has_confounder(self.scenario)
        lam_y_ok = self.scenario in ("my-conf", "both")
        for i, eq in enumerate(coefs.intermediate, start=1):
            if eq.on_confounder != 0.0 and not lam_x_ok:
                raise ValueError(
                    f"scenario {self.scenario!r} forbids a confounder loading on X{i}"
                )
        if coefs.mediator.on_confounder != 0.0 and not lam_m_ok:
            raise ValueError(f"scenario {self.scenario!r} forbids a confounder loading on M")
        if coefs.outcome.on_confounder != 0.0 and not lam_y_ok:
            raise ValueError(f"scenario {self.scenario!r} forbids a confounder loading on Y")


def _merge_equation(cls, defaults, spec: dict, context: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(spec) - allowed
    if unknown:
        raise ValueError(f"unknown key {sorted(unknown)[0]!r} in {context}")
    merged = {k: (tuple(v) if isinstance(v, list) else v) for k, v in spec.items()}
    return replace(defaults, **merged)


def config_from_json(text: str) -> ScenarioConfig:
    """Build a ScenarioConfig from a JSON document.

    The document mirrors the dataclass structure; omitted fields take the
    documented defaults, including the scenario's active confounder
    loadings when the whole equation block is omitted.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON scenario config: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError("scenario config must be a JSON object")
    unknown = set(doc) - {"scenario", "n", "reps", "seed", "coefficients"}
    if unknown:
        raise ValueError(f"unknown key {sorted(unknown)[0]!r} in scenario config")
    if "scenario" not in doc:
        raise ValueError("scenario config must name a scenario")
    scenario = doc["scenario"]
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}, expected one of {SCENARIOS}")
    coefs = default_coefficients(scenario)
    spec = doc.get("coefficients", {})
    if not isinstance(spec, dict):
        raise ValueError("coefficients must be a JSON object")
    unknown = set(spec) - {"p_r", "baseline", "intermediate", "mediator", "outcome"}
    if unknown:
        raise ValueError(f"unknown key {sorted(unknown)[0]!r} in coefficients")
    if "p_r" in spec:
        coefs = replace(coefs, p_r=spec["p_r"])
    if "baseline" in spec:
        coefs = replace(
            coefs, baseline=_merge_equation(BaselineEquation, coefs.baseline, spec["baseline"], "baseline")
        )
    if "intermediate" in spec:
        eqs = spec["intermediate"]
        if not isinstance(eqs, list) or not eqs:
            raise ValueError("intermediate must be a non-empty JSON array of equation objects")
        base = coefs.intermediate[0]
        # Replace the equations and resize the coupling vectors in one step;
        # partial updates would fail the length cross-validation.
        k = len(eqs)
        coefs = replace(
            coefs,
            intermediate=tuple(
                _merge_equation(IntermediateEquation, base, eq, f"intermediate[{i}]")
                for i, eq in enumerate(eqs)
            ),
            mediator=replace(coefs.mediator, on_intermediate=coefs.mediator.on_intermediate[:1] * k),
            outcome=replace(coefs.outcome, on_intermediate=coefs.outcome.on_intermediate[:1] * k),
        )
    if "mediator" in spec:
        coefs = replace(
            coefs, mediator=_merge_equation(MediatorEquation, coefs.mediator, spec["mediator"], "mediator")
        )
    if "outcome" in spec:
        coefs = replace(
            coefs, outcome=_merge_equation(OutcomeEquation, coefs.outcome, spec["outcome"], "outcome")
        )
    return ScenarioConfig(
        scenario=scenario,
        n=doc.get("n", 2000),
        reps=doc.get("reps", 200),
        seed=doc.get("seed", 0),
        coefficients=coefs,
    )


@dataclass(frozen=True)
class MethodTruth:
    initial: float
    explained: float
    unexplained: float

    def quantity(self, name: str) -> float:
        return float(getattr(self, name))


@dataclass(frozen=True)
class TrueValues:
    dic: MethodTruth
    kob: MethodTruth
    cda: MethodTruth

    def for_method(self, method: str) -> MethodTruth:
        if method == ADJUSTED_METHOD:
            return self.cda
        try:
            return getattr(self, method.lower())
        except AttributeError:
            raise ValueError(f"unknown method {method!r}") from None


# ---------------------------------------------------------------------------
# Moment propagation and population projections


class _Moments:
    """Implied means and covariances of the SEM variables, built in order."""

    def __init__(self) -> None:
        self.names: list[str] = []
        self.mean = np.empty(0)
        self.cov = np.empty((0, 0))

    def add_root(self, name: str, mean: float, var: float) -> None:
        k = len(self.names)
        new_mean = np.append(self.mean, mean)
        new_cov = np.zeros((k + 1, k + 1))
        new_cov[:k, :k] = self.cov
        new_cov[k, k] = var
        self.names.append(name)
        self.mean, self.cov = new_mean, new_cov

    def add_linear(self, name: str, intercept: float, weights: dict[str, float], noise_sd: float) -> None:
        k = len(self.names)
        w = np.zeros(k)
        for parent, coef in weights.items():
            w[self.names.index(parent)] = coef
        mean = intercept + float(w @ self.mean)
        cross = self.cov @ w
        var = float(w @ cross) + noise_sd**2
        new_mean = np.append(self.mean, mean)
        new_cov = np.zeros((k + 1, k + 1))
        new_cov[:k, :k] = self.cov
        new_cov[:k, k] = cross
        new_cov[k, :k] = cross
        new_cov[k, k] = var
        self.names.append(name)
        self.mean, self.cov = new_mean, new_cov

    def mean_of(self, name: str) -> float:
        return float(self.mean[self.names.index(name)])

    def project(self, target: str, regressors: list[str]) -> tuple[float, dict[str, float], float]:
        """Population linear projection: intercept, slopes, residual variance."""
        t = self.names.index(target)
        idx = [self.names.index(r) for r in regressors]
        sxx = self.cov[np.ix_(idx, idx)]
        sxy = self.cov[idx, t]
        try:
            coef = np.linalg.solve(sxx, sxy)
        except np.linalg.LinAlgError as exc:
            raise EstimationError(
                "implied design covariance is singular; degenerate coefficient choice"
            ) from exc
        intercept = self.mean[t] - float(coef @ self.mean[idx])
        resid_var = float(self.cov[t, t] - coef @ sxy)
        return intercept, dict(zip(regressors, (float(c) for c in coef))), max(resid_var, 0.0)


def _strip_confounding(coefs: SemCoefficients) -> SemCoefficients:
    return replace(
        coefs,
        intermediate=tuple(replace(eq, on_confounder=0.0) for eq in coefs.intermediate),
        mediator=replace(coefs.mediator, on_confounder=0.0),
        outcome=replace(coefs.outcome, on_confounder=0.0),
    )


def _x_names(config: ScenarioConfig) -> list[str]:
    if not scenario_has_intermediate(config.scenario):
        return []
    assert config.coefficients is not None
    return [f"X{i}" for i in range(1, len(config.coefficients.intermediate) + 1)]


def implied_moments(
    config: ScenarioConfig, group: int | None = None, confounded: bool = True
) -> _Moments:
    """Propagate the SEM to implied moments.

    group=0/1 conditions on the group indicator (its variance drops to 0);
    confounded=False evaluates the confounder-free twin (loadings zeroed).
    The confounder variable U appears in the moment set only when the
    scenario has one and confounded=True.
    """
    coefs = config.coefficients
    assert coefs is not None
    if not confounded:
        coefs = _strip_confounding(coefs)
    has_c = scenario_has_baseline(config.scenario)
    has_u = scenario_has_confounder(config.scenario) and confounded
    mom = _Moments()
    if group is None:
        mom.add_root("R", coefs.p_r, coefs.p_r * (1.0 - coefs.p_r))
    else:
        mom.add_root("R", float(group), 0.0)
    if has_c:
        mom.add_linear("C", coefs.baseline.intercept, {"R": coefs.baseline.on_group}, coefs.baseline.noise_sd)
    if has_u:
        mom.add_root("U", 0.0, 1.0)
    xs = _x_names(config)
    for name, eq in zip(xs, coefs.intermediate):
        w = {"R": eq.on_group}
        if has_c:
            w["C"] = eq.on_baseline
        if has_u:
            w["U"] = eq.on_confounder
        mom.add_linear(name, eq.intercept, w, eq.noise_sd)
    med = coefs.mediator
    w = {"R": med.on_group}
    if has_c:
        w["C"] = med.on_baseline
    if has_u:
        w["U"] = med.on_confounder
    for name, coef in zip(xs, med.on_intermediate):
        w[name] = coef
    mom.add_linear("M", med.intercept, w, med.noise_sd)
    out = coefs.outcome
    w = {"R": out.on_group, "M": out.on_mediator}
    if has_c:
        w["C"] = out.on_baseline
    if has_u:
        w["U"] = out.on_confounder
    for name, coef in zip(xs, out.on_intermediate):
        w[name] = coef
    mom.add_linear("Y", out.intercept, w, out.noise_sd)
    return mom


def _structural_means(config: ScenarioConfig, group: int, c: float) -> tuple[list[float], float, float]:
    """E[X], E[M], E[Y] given group and baseline value, from the structure.

    Exact without any normality assumption: the confounder and the noises
    are mean-zero and independent of (group, baseline), so they drop out.
    """
    coefs = config.coefficients
    assert coefs is not None
    has_c = scenario_has_baseline(config.scenario)
    has_x = scenario_has_intermediate(config.scenario)
    c_term = c if has_c else 0.0
    e_x: list[float] = []
    if has_x:
        for eq in coefs.intermediate:
            e_x.append(eq.intercept + eq.on_group * group + eq.on_baseline * c_term)
    med = coefs.mediator
    e_m = med.intercept + med.on_group * group + (med.on_baseline * c_term if has_c else 0.0)
    e_m += sum(a * x for a, x in zip(med.on_intermediate, e_x))
    out = coefs.outcome
    e_y = out.intercept + out.on_group * group + (out.on_baseline * c_term if has_c else 0.0)
    e_y += sum(b * x for b, x in zip(out.on_intermediate, e_x)) + out.on_mediator * e_m
    return e_x, e_m, e_y


def _cda_truth(config: ScenarioConfig) -> MethodTruth:
    """Closed-form causal estimands, standardized to the group-1 baseline mean.

    All conditional expectations are linear in the baseline value, so
    averaging over the group-1 baseline distribution is evaluation at its
    mean.
    """
    coefs = config.coefficients
    assert coefs is not None
    has_c = scenario_has_baseline(config.scenario)
    cbar1 = coefs.baseline.intercept + coefs.baseline.on_group if has_c else 0.0
    e_x1, e_m1, e_y1 = _structural_means(config, 1, cbar1)
    _, e_m0, e_y0 = _structural_means(config, 0, cbar1)
    out = coefs.outcome
    counterfactual = e_y1 - out.on_mediator * (e_m1 - e_m0)
    tau = e_y1 - e_y0
    delta = e_y1 - counterfactual
    zeta = counterfactual - e_y0
    return MethodTruth(initial=tau, explained=delta, unexplained=zeta)


def compute_truths(config: ScenarioConfig) -> TrueValues:
    """Population truths per method, from implied moments (no sampling).

    Projections are evaluated on the confounder-free twin configuration:
    each method's target is defined under its own no-unmeasured-confounding
    assumption, and in unconfounded scenarios the twin is the scenario
    itself. The causal estimands are computed structurally and are
    unaffected by the confounder either way.
    """
    xs = _x_names(config)
    cs = ["C"] if scenario_has_baseline(config.scenario) else []

    pooled = implied_moments(config, confounded=False)
    _, coefs_a, _ = pooled.project("Y", ["R"] + xs + cs)
    _, coefs_b, _ = pooled.project("Y", ["R"] + xs + cs + ["M"])
    alpha = coefs_a["R"]
    beta = coefs_b["R"]
    dic = MethodTruth(initial=alpha, explained=alpha - beta, unexplained=beta)

    mom1 = implied_moments(config, group=1, confounded=False)
    mom0 = implied_moments(config, group=0, confounded=False)
    _, coefs_g1, _ = mom1.project("Y", xs + cs + ["M"])
    raw_gap = mom1.mean_of("Y") - mom0.mean_of("Y")
    explained = coefs_g1["M"] * (mom1.mean_of("M") - mom0.mean_of("M"))
    kob = MethodTruth(initial=raw_gap, explained=explained, unexplained=raw_gap - explained)

    return TrueValues(dic=dic, kob=kob, cda=_cda_truth(config))


def baseline_pathway_contribution(config: ScenarioConfig) -> float:
    """Group effect on the outcome routed through the baseline covariate.

    This is the analytic discrepancy between the raw-gap initial disparity
    (KOB) and the baseline-standardized one (CDA): the group shifts the
    baseline covariate, which feeds the outcome directly, through the
    mediator, and through any intermediate covariates.
    """
    if not scenario_has_baseline(config.scenario):
        return 0.0
    coefs = config.coefficients
    assert coefs is not None
    med, out = coefs.mediator, coefs.outcome
    dy_dc = out.on_baseline + out.on_mediator * med.on_baseline
    if scenario_has_intermediate(config.scenario):
        for eq, b_x, a_x in zip(coefs.intermediate, out.on_intermediate, med.on_intermediate):
            dy_dc += eq.on_baseline * (b_x + out.on_mediator * a_x)
    return coefs.baseline.on_group * dy_dc


def intermediate_pathway_contribution(config: ScenarioConfig) -> float:
    """Group effect on the outcome routed through the intermediate covariates
    (directly and via the mediator), excluding any baseline routing.

    This is the analytic discrepancy between the baseline-standardized
    initial disparity (CDA), which keeps intermediate pathways, and the
    fully covariate-adjusted one (DIC), which removes them.
    """
    if not scenario_has_intermediate(config.scenario):
        return 0.0
    coefs = config.coefficients
    assert coefs is not None
    med, out = coefs.mediator, coefs.outcome
    return sum(
        eq.on_group * (b_x + out.on_mediator * a_x)
        for eq, b_x, a_x in zip(coefs.intermediate, out.on_intermediate, med.on_intermediate)
    )


def oracle_sensitivity_params(config: ScenarioConfig) -> SensitivityParams:
    """Population sensitivity parameters of the scenario's confounder.

    Partial R-squared of the confounder with the outcome given group,
    covariates, and mediator; with the mediator given group and covariates;
    and the sign of the product of its mediator and outcome loadings.
    Scenarios without a confounder get (0, 0, +1).
    """
    if not scenario_has_confounder(config.scenario):
        return SensitivityParams(r2_yu=0.0, r2_mu=0.0, sign=+1)
    coefs = config.coefficients
    assert coefs is not None
    mom = implied_moments(config, confounded=True)
    xs = _x_names(config)
    cs = ["C"] if scenario_has_baseline(config.scenario) else []

    def partial(target: str, controls: list[str]) -> float:
        _, _, v_without = mom.project(target, controls)
        _, _, v_with = mom.project(target, controls + ["U"])
        if v_without <= 0.0:
            raise EstimationError(f"{target} fully explained without the confounder")
        return min(1.0, max(0.0, 1.0 - v_with / v_without))

    r2_mu = partial("M", ["R"] + xs + cs)
    r2_yu = partial("Y", ["R"] + xs + cs + ["M"])
    product = coefs.mediator.on_confounder * coefs.outcome.on_confounder
    return SensitivityParams(r2_yu=r2_yu, r2_mu=r2_mu, sign=-1 if product < 0 else +1)


def oracle_explained_bias(config: ScenarioConfig) -> float:
    """Population bias of the explained (delta) estimate under mediator-
    outcome confounding, in closed form from the structural coefficients.

    Equals lam_y * (lam_m * var_U / var_M_perp) * Delta_M, where var_M_perp
    is the residual variance of the mediator given group and covariates and
    Delta_M the baseline-standardized mediator gap. Zero when either
    loading is zero.
    """
    coefs = config.coefficients
    assert coefs is not None
    lam_m = coefs.mediator.on_confounder
    lam_y = coefs.outcome.on_confounder
    if lam_m == 0.0 or lam_y == 0.0 or not scenario_has_confounder(config.scenario):
        return 0.0
    mom = implied_moments(config, confounded=True)
    xs = _x_names(config)
    cs = ["C"] if scenario_has_baseline(config.scenario) else []
    _, _, var_m_perp = mom.project("M", ["R"] + xs + cs)
    has_c = scenario_has_baseline(config.scenario)
    cbar1 = coefs.baseline.intercept + coefs.baseline.on_group if has_c else 0.0
    _, e_m1, _ = _structural_means(config, 1, cbar1)
    _, e_m0, _ = _structural_means(config, 0, cbar1)
    return lam_y * (lam_m * 1.0 / var_m_perp) * (e_m1 - e_m0)


# ---------------------------------------------------------------------------
# Generation and the replication harness


def generate(config: ScenarioConfig, rep_index: int) -> Dataset:
    """One synthetic dataset for replication rep_index.

    Deterministic given (config.seed, rep_index); variables are drawn in
    topological order from a per-replication substream. Absent variables
    are omitted from the Dataset entirely.
    """
    if rep_index < 0:
        raise ValueError(f"rep_index must be >= 0, got {rep_index}")
    coefs = config.coefficients
    assert coefs is not None
    n = config.n
    rng = substream(config.seed, rep_index, 0)
    has_c = scenario_has_baseline(config.scenario)
    has_u = scenario_has_confounder(config.scenario)

    r = (rng.random(n) < coefs.p_r).astype(np.float64)
    columns: dict[str, np.ndarray] = {"R": r}
    c = np.zeros(n)
    if has_c:
        b = coefs.baseline
        c = b.intercept + b.on_group * r + rng.normal(0.0, b.noise_sd, n)
        columns["C"] = c
    u = rng.normal(0.0, 1.0, n) if has_u else np.zeros(n)
    xs = _x_names(config)
    x_cols: list[np.ndarray] = []
    for name, eq in zip(xs, coefs.intermediate):
        x = (
            eq.intercept
            + eq.on_group * r
            + eq.on_baseline * c
            + eq.on_confounder * u
            + rng.normal(0.0, eq.noise_sd, n)
        )
        x_cols.append(x)
        columns[name] = x
    med = coefs.mediator
    m = med.intercept + med.on_group * r + med.on_confounder * u + rng.normal(0.0, med.noise_sd, n)
    if has_c:
        m = m + med.on_baseline * c
    for a, x in zip(med.on_intermediate, x_cols):
        m = m + a * x
    columns["M"] = m
    out = coefs.outcome
    y = (
        out.intercept
        + out.on_group * r
        + out.on_mediator * m
        + out.on_confounder * u
        + rng.normal(0.0, out.noise_sd, n)
    )
    if has_c:
        y = y + out.on_baseline * c
    for b_x, x in zip(out.on_intermediate, x_cols):
        y = y + b_x * x
    columns["Y"] = y

    roles = RoleSpec(
        group="R",
        outcome="Y",
        mediator="M",
        baseline=("C",) if has_c else (),
        intermediate=tuple(xs),
    )
    return Dataset(columns, roles)


@dataclass(frozen=True)
class CellSummary:
    """Aggregate of one (method, quantity) across replications."""

    method: str
    quantity: str
    mean: float
    lower: float
    upper: float
    truth: float
    covered: bool
    mc_standard_error: float
    estimates: tuple[float, ...]


@dataclass(frozen=True)
class SimulationReport:
    scenario: str
    n: int
    reps: int
    seed: int
    cells: tuple[CellSummary, ...]
    warnings: tuple[str, ...]

    def cell(self, method: str, quantity: str) -> CellSummary:
        for c in self.cells:
            if c.method == method and c.quantity == quantity:
                return c
        raise KeyError(f"no cell for ({method}, {quantity})")

    @property
    def methods(self) -> tuple[str, ...]:
        seen: list[str] = []
        for c in self.cells:
            if c.method not in seen:
                seen.append(c.method)
        return tuple(seen)


def _rep_percentiles(values: np.ndarray) -> tuple[float, float]:
    """Same 1-based ceil(q*B) order-statistic rule as the bootstrap."""
    ordered = np.sort(values)
    b = ordered.size

    def at(num: int) -> float:
        idx = -((-num * b) // 1000)
        return float(ordered[max(idx, 1) - 1])

    return at(25), at(975)


def _one_replication(
    config: ScenarioConfig,
    rep: int,
    methods: tuple[str, ...],
    adjusted: bool,
    cda_settings: CdaSettings,
    params: SensitivityParams | None,
) -> dict[str, tuple[float, float, float]]:
    out: dict[str, tuple[float, float, float]] = {}
    cda_result: DecompositionResult | None = None
    try:
        data = generate(config, rep)
        for method in methods:
            if method == "DIC":
                res = decompose_dic(data)
            elif method == "KOB":
                res = decompose_kob(data)
            else:
                res = decompose_cda(
                    data, replace(cda_settings, seed=stream_seed(config.seed, rep, 1))
                )
                cda_result = res
            out[method] = (res.initial, res.explained, res.unexplained)
        if adjusted:
            assert cda_result is not None and params is not None
            adj = adjust(cda_result, data, params)
            out[ADJUSTED_METHOD] = (adj.tau, adj.delta_adjusted, adj.zeta_adjusted)
    except (DataError, EstimationError) as exc:
        raise EstimationError(f"replication {rep}: {exc}") from exc
    return out


def run_harness(
    config: ScenarioConfig,
    methods: tuple[str, ...] = HARNESS_METHODS,
    sensitivity: bool = False,
    cda_settings: CdaSettings | None = None,
    workers: int = 1,
) -> SimulationReport:
    """Replicate generate + estimate, aggregate against the truth oracle.

    sensitivity=True additionally runs the bias adjustment on every
    replication's CDA result with oracle-true parameters computed from the
    configuration's coefficients. Replications use per-index substreams, so
    the report is byte-identical for any worker count.
    """
    methods = tuple(dict.fromkeys(methods))
    unknown = [m for m in methods if m not in HARNESS_METHODS]
    if unknown:
        raise ValueError(f"unknown method {unknown[0]!r}")
    methods = tuple(m for m in HARNESS_METHODS if m in methods)
    if not methods:
        raise ValueError("no methods requested")
    if sensitivity and "CDA" not in methods:
        raise ValueError("sensitivity adjustment needs the CDA method")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    settings = cda_settings or CdaSettings()
    params = oracle_sensitivity_params(config) if sensitivity else None
    truths = compute_truths(config)

    reps = config.reps
    if workers == 1:
        results = [
            _one_replication(config, rep, methods, sensitivity, settings, params)
            for rep in range(reps)
        ]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    lambda rep: _one_replication(config, rep, methods, sensitivity, settings, params),
                    range(reps),
                )
            )

    report_methods = methods + ((ADJUSTED_METHOD,) if sensitivity else ())
    cells: list[CellSummary] = []
    for method in report_methods:
        truth = truths.for_method(method)
        per_rep = np.array([results[rep][method] for rep in range(reps)])
        for qi, quantity in enumerate(("initial", "explained", "unexplained")):
            values = per_rep[:, qi]
            lower, upper = _rep_percentiles(values)
            t = truth.quantity(quantity)
            mcse = (
                float(values.std(ddof=1) / np.sqrt(reps)) if reps > 1 else float("nan")
            )
            cells.append(
                CellSummary(
                    method=method,
                    quantity=quantity,
                    mean=float(values.mean()),
                    lower=lower,
                    upper=upper,
                    truth=t,
                    covered=bool(lower <= t <= upper),
                    mc_standard_error=mcse,
                    estimates=tuple(float(v) for v in values),
                )
            )
    warnings: tuple[str, ...] = ()
    if reps < 20:
        warnings = ("interval unreliable: fewer than 20 replications",)
    return SimulationReport(
        scenario=config.scenario,
        n=config.n,
        reps=reps,
        seed=config.seed,
        cells=tuple(cells),
        warnings=warnings,
    )
