"""Built-in decision models and study designs.

* The Ades decision tree: two treatments, four uncertain inputs, four future
  data-collection designs (side-effect rate, quality of life after the event,
  odds-ratio trial, and the same trial analysed as two event probabilities).
* Conjugate toys with analytic preposterior moments and exact EVSI values:
  Beta-Binomial with a flat prior, Exponential-Gamma, Normal-Normal, and a
  quadratic-INB Normal model used for variance-convergence experiments.

All models are registered by name; parameters can be overridden per run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats
from scipy.special import expit, log_expit, logit

from .model import DecisionModel
from .posterior import (
    BetaBinomialUpdate,
    GammaExponentialUpdate,
    MetropolisUpdate,
    NormalNormalUpdate,
    NullUpdate,
    metropolis_ensemble,
)
from .rng import DistSpec, SeedSpec
from .util import ConfigError, gauss_hermite_expectation


# ---------------------------------------------------------------------------
# study-design container


@dataclass(frozen=True)
class StudyDesign:
    """A future data-collection exercise attached to a decision model.

    `focal_sufficient` records whether the future data depend on the model
    parameters only through the focal set; when they do, the preposterior
    variance can never legitimately exceed the conditional-INB variance.
    """

    name: str
    model_name: str
    focal_params: tuple[str, ...]
    sample_size: int
    recipe: object
    simulate_batch: Callable[[dict, SeedSpec], dict]
    summary_names: tuple[str, ...]
    summarize_batch: Callable[[dict], np.ndarray]
    batch_inner_means: Callable
    informs_all: bool = False
    is_discrete_data: bool = False
    focal_sufficient: bool = True

    def describe_dataset(self, dataset) -> str:
        values = self.summarize_batch(dataset)[0]
        return " ".join(f"{n}={v:g}" for n, v in zip(self.summary_names, values))


def generate_future_data(design: StudyDesign, phi_row: dict, seed: SeedSpec) -> dict:
    """One simulated future dataset conditional on a single parameter draw."""
    point = {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in phi_row.items()}
    return design.simulate_batch(point, seed)


# ---------------------------------------------------------------------------
# Ades decision tree

ADES_DEFAULTS = {
    "L": 30.0,          # years of life affected by the critical event
    "Qse": 1.0,         # QALY loss from side effects
    "Ce": 200000.0,     # cost of the critical event
    "Ct": 15000.0,      # cost of the new treatment
    "Cse": 100000.0,    # cost of treating side effects
    "lam": 75000.0,     # willingness to pay per QALY
    "pc_alpha": 15.0,
    "pc_beta": 85.0,
    "pse_alpha": 3.0,
    "pse_beta": 9.0,
    "log_or_mean": -1.5,
    "log_or_var": 1.0 / 3.0,
    "logit_qe_mean": 0.6,
    "logit_qe_var": 1.0 / 6.0,
}


def ades_net_benefit(pc, pse, pt, qe, params=None):
    """Net benefit of both arms of the decision tree, vectorised.

    Arm 1 is the standard of care (event risk pc), arm 2 the new treatment
    (event risk pt, side-effect risk pse).  qe is quality of life after the
    critical event.
    """
    p = params or ADES_DEFAULTS
    lam, L, Qse = p["lam"], p["L"], p["Qse"]
    Ce, Ct, Cse = p["Ce"], p["Ct"], p["Cse"]
    pc = np.asarray(pc, dtype=float)
    pse, pt, qe = (np.asarray(v, dtype=float) for v in (pse, pt, qe))

    nb1 = pc * (lam * L * (1 + qe) / 2 - Ce) + (1 - pc) * lam * L
    nb2 = (
        pse * pt * (lam * (L * (1 + qe) / 2 - Qse) - (Ct + Cse + Ce))
        + pse * (1 - pt) * (lam * (L - Qse) - (Ct + Cse))
        + (1 - pse) * pt * (lam * L * (1 + qe) / 2 - (Ct + Ce))
        + (1 - pse) * (1 - pt) * (lam * L - Ct)
    )
    return nb1, nb2


def _ades_inb_at_means(pc, pse, pt, qe, params):
    # The INB is multilinear in (pc, pse, pt, qe) and no monomial mixes pc or
    # pse with pt under the posterior factorisation, so plugging component
    # means into the formula gives the exact conditional mean.
    nb1, nb2 = ades_net_benefit(pc, pse, pt, qe, params)
    return nb2 - nb1


def build_ades(**overrides) -> DecisionModel:
    p = dict(ADES_DEFAULTS)
    unknown = set(overrides) - set(p)
    if unknown:
        raise ConfigError(f"unknown ades parameters {sorted(unknown)}")
    p.update(overrides)

    priors = {
        "Pc": DistSpec("beta", p["pc_alpha"], p["pc_beta"]),
        "Pse": DistSpec("beta", p["pse_alpha"], p["pse_beta"]),
        "log_or": DistSpec("normal", p["log_or_mean"], p["log_or_var"]),
        "logit_qe": DistSpec("normal", p["logit_qe_mean"], p["logit_qe_var"]),
    }

    def derived(cols):
        return {
            "Pt": expit(logit(cols["Pc"]) + cols["log_or"]),
            "Qe": expit(cols["logit_qe"]),
        }

    def net_benefit(cols):
        nb1, nb2 = ades_net_benefit(cols["Pc"], cols["Pse"], cols["Pt"], cols["Qe"], p)
        return np.column_stack([nb1, nb2])

    return DecisionModel(
        name="ades",
        priors=priors,
        n_treatments=2,
        net_benefit=net_benefit,
        comparison=(1, 0),
        derived=derived,
        params=p,
    )


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _unit_leggauss(n=200):
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = ((x + 1) / 2, w / 2)
    return _GL_CACHE[n]


def _ades_prior_means(p) -> dict:
    """Exact prior means of the tree inputs, by quadrature (no Monte Carlo)."""
    e_pc = p["pc_alpha"] / (p["pc_alpha"] + p["pc_beta"])
    e_pse = p["pse_alpha"] / (p["pse_alpha"] + p["pse_beta"])
    e_qe = float(gauss_hermite_expectation(expit, p["logit_qe_mean"], p["logit_qe_var"]))
    nodes, weights = _unit_leggauss()
    dens = stats.beta.pdf(nodes, p["pc_alpha"], p["pc_beta"])
    inner = gauss_hermite_expectation(expit, logit(nodes) + p["log_or_mean"], p["log_or_var"])
    e_pt = float(np.sum(weights * dens * inner))
    return {"Pc": e_pc, "Pse": e_pse, "Qe": e_qe, "Pt": e_pt}


def _ades_study1(model: DecisionModel, n: int) -> StudyDesign:
    p = model.params
    means = _ades_prior_means(p)

    def simulate(cols, seed):
        gen = seed.generator()
        return {"x": gen.binomial(n, cols["Pse"]).astype(float)}

    def summarize(ds):
        return ds["x"][:, None]

    recipe = BetaBinomialUpdate("Pse", p["pse_alpha"], p["pse_beta"], n, "x")

    def inner_means(ds, seed=None, n_inner=0, burn_in=0):
        pse_post = recipe.exact_means(ds)
        return _ades_inb_at_means(means["Pc"], pse_post, means["Pt"], means["Qe"], p)

    return StudyDesign(
        name="study1", model_name="ades", focal_params=("Pse",), sample_size=n,
        recipe=recipe, simulate_batch=simulate, summary_names=("x",),
        summarize_batch=summarize, batch_inner_means=inner_means,
        is_discrete_data=True,
    )


def _ades_study2(model: DecisionModel, n: int, obs_var: float) -> StudyDesign:
    p = model.params
    means = _ades_prior_means(p)
    recipe = NormalNormalUpdate("logit_qe", p["logit_qe_mean"], p["logit_qe_var"],
                                obs_var, "responses")

    def simulate(cols, seed):
        gen = seed.generator()
        loc = np.asarray(cols["logit_qe"], dtype=float)[:, None]
        return {"responses": gen.normal(loc, np.sqrt(obs_var), (loc.shape[0], n))}

    def summarize(ds):
        return ds["responses"].mean(axis=1)[:, None]

    def inner_means(ds, seed=None, n_inner=0, burn_in=0):
        mean, var = recipe.posterior_params(ds)
        e_qe = gauss_hermite_expectation(expit, np.atleast_1d(mean), np.full_like(np.atleast_1d(mean), var))
        return _ades_inb_at_means(means["Pc"], means["Pse"], means["Pt"], e_qe, p)

    return StudyDesign(
        name="study2", model_name="ades", focal_params=("logit_qe",), sample_size=n,
        recipe=recipe, simulate_batch=simulate, summary_names=("mean_response",),
        summarize_batch=summarize, batch_inner_means=inner_means,
    )


def _two_arm_simulate(n):
    def simulate(cols, seed):
        gen = seed.generator()
        return {
            "dc": gen.binomial(n, cols["Pc"]).astype(float),
            "dt": gen.binomial(n, cols["Pt"]).astype(float),
        }

    return simulate


def _two_arm_summarize(ds):
    return np.column_stack([ds["dc"], ds["dt"]])


def _ades_two_arm_machinery(model: DecisionModel, n: int):
    """Shared posterior for the two-arm trial: a random-walk update of
    (logit event-probability, log odds-ratio) against both arms' counts."""
    p = model.params
    means = _ades_prior_means(p)
    a_pc, b_pc = p["pc_alpha"], p["pc_beta"]
    or_mean, or_prec = p["log_or_mean"], 1.0 / p["log_or_var"]

    def log_posterior(states, dataset, idx):
        x0, x1 = states[:, 0], states[:, 1]
        dc = dataset["dc"][idx]
        dt = dataset["dt"][idx]
        xt = x0 + x1
        lp = a_pc * log_expit(x0) + b_pc * log_expit(-x0)
        lp += -0.5 * or_prec * (x1 - or_mean) ** 2
        lp += dc * log_expit(x0) + (n - dc) * log_expit(-x0)
        lp += dt * log_expit(xt) + (n - dt) * log_expit(-xt)
        return lp

    prior_pc_sd = np.sqrt(a_pc * b_pc / ((a_pc + b_pc) ** 2 * (a_pc + b_pc + 1)))
    mean_pc = a_pc / (a_pc + b_pc)
    scales = (prior_pc_sd / (mean_pc * (1 - mean_pc)), np.sqrt(p["log_or_var"]))

    recipe = MetropolisUpdate(
        params=("logit_pc", "log_or"),
        log_posterior=log_posterior,
        init=(float(logit(mean_pc)), or_mean),
        base_scales=tuple(float(s) for s in scales),
        transform=lambda chains: {
            "Pc": expit(chains[..., 0]),
            "log_or": chains[..., 1],
        },
    )

    def inner_means(ds, seed, n_inner=2000, burn_in=500):
        stats_mean, _ = metropolis_ensemble(
            lambda states, idx: log_posterior(states, ds, idx),
            n_chains=len(ds["dc"]),
            init=np.asarray(recipe.init),
            scales=np.asarray(recipe.base_scales),
            n_keep=n_inner,
            burn_in=burn_in,
            seed=seed,
            stat_fn=lambda s: np.column_stack([expit(s[:, 0]), expit(s[:, 0] + s[:, 1])]),
        )
        return _ades_inb_at_means(stats_mean[:, 0], means["Pse"], stats_mean[:, 1],
                                  means["Qe"], p)

    return recipe, inner_means


def _ades_study3(model: DecisionModel, n: int) -> StudyDesign:
    # the trial counts inform the control-arm probability as well as the
    # odds ratio, so the focal set does not exhaust the information in the
    # data and the conditional-INB variance is not an upper bound
    recipe, inner_means = _ades_two_arm_machinery(model, n)
    return StudyDesign(
        name="study3", model_name="ades", focal_params=("log_or",), sample_size=n,
        recipe=recipe, simulate_batch=_two_arm_simulate(n), summary_names=("dc", "dt"),
        summarize_batch=_two_arm_summarize, batch_inner_means=inner_means,
        is_discrete_data=True, focal_sufficient=False,
    )


def _ades_study4(model: DecisionModel, n: int) -> StudyDesign:
    # Same trial and same joint posterior as study3; what changes is the
    # focal set, exercising the two-dimensional conditional-INB machinery.
    recipe, inner_means = _ades_two_arm_machinery(model, n)
    return StudyDesign(
        name="study4", model_name="ades", focal_params=("Pc", "Pt"), sample_size=n,
        recipe=recipe, simulate_batch=_two_arm_simulate(n), summary_names=("dc", "dt"),
        summarize_batch=_two_arm_summarize, batch_inner_means=inner_means,
        is_discrete_data=True,
    )


# ---------------------------------------------------------------------------
# conjugate toys


@dataclass(frozen=True)
class ConjugateToy:
    """One of the closed-form validation models plus a future sample size."""

    variant: str
    N: int
    params: dict = field(default_factory=dict)

    VARIANTS = ("beta_binomial_uniform", "exp_gamma", "normal_normal")

    def __post_init__(self):
        if self.variant not in self.VARIANTS:
            raise ConfigError(f"unknown toy variant {self.variant!r}; choose {self.VARIANTS}")
        if self.N < 0:
            raise ValueError("future sample size must be >= 0")
        defaults = _TOY_DEFAULTS[self.variant]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown {self.variant} parameters {sorted(unknown)}")
        merged = dict(defaults)
        merged.update(self.params)
        object.__setattr__(self, "params", merged)


_TOY_DEFAULTS = {
    "beta_binomial_uniform": {"k": 20000.0, "c": 10000.0},
    "exp_gamma": {"alpha": 5.0, "beta": 1.0, "k": 200.0, "c0": 900.0, "c1": 100.0},
    "normal_normal": {"theta0": 0.0, "prior_var": 1.0, "obs_var": 1.0, "k": 10000.0, "c": 0.0},
}


@dataclass(frozen=True)
class PreposteriorSummary:
    mean: float
    variance: float
    evsi: float | None = None


def _bb_enumeration_evsi(k: float, c: float, N: int) -> float:
    """Exact EVSI for the flat-prior Binomial trial: N+1 equally likely outcomes."""
    x = np.arange(N + 1)
    mu = k * (1.0 + x) / (2.0 + N) - c
    return float(np.mean(np.maximum(mu, 0.0)) - max(0.0, k / 2.0 - c))


def _exp_gamma_evsi(alpha: float, beta: float, k: float, c_total: float, N: int) -> float:
    """Exact EVSI via the Beta(alpha, N) law of the inverse posterior scale."""
    if N == 0:
        return 0.0
    g = k * (alpha + N) / beta
    prior_term = max(0.0, k * alpha / beta - c_total)
    if c_total <= 0:
        return g * alpha / (alpha + N) - c_total - prior_term
    b_star = c_total / g
    if b_star >= 1.0:
        return max(0.0, -prior_term)
    tail1 = stats.beta.sf(b_star, alpha + 1, N)
    tail0 = stats.beta.sf(b_star, alpha, N)
    value = g * (alpha / (alpha + N)) * tail1 - c_total * tail0
    return max(0.0, float(value) - prior_term)


def _normal_normal_evsi(theta0, prior_var, obs_var, k, c, N) -> float:
    if N == 0:
        return 0.0
    m = k * theta0 - c
    s2 = k**2 * prior_var**2 / (obs_var / N + prior_var)
    s = np.sqrt(s2)
    value = s * stats.norm.pdf(m / s) + m * stats.norm.cdf(m / s)
    return max(0.0, float(value) - max(0.0, m))


def analytic_preposterior(toy: ConjugateToy) -> PreposteriorSummary:
    """Closed-form preposterior mean/variance of the treatment net benefit,
    plus the exact EVSI where available.

    The variance equals that of the INB preposterior mean (the comparator is
    constant in every toy); the EVSI accounts for the comparator.
    """
    p, N = toy.params, toy.N
    if toy.variant == "beta_binomial_uniform":
        k, c = p["k"], p["c"]
        return PreposteriorSummary(
            mean=k / 2.0 - c,
            variance=k**2 * N / (12.0 * (N + 2.0)),
            evsi=_bb_enumeration_evsi(k, c, N),
        )
    if toy.variant == "exp_gamma":
        a, b, k = p["alpha"], p["beta"], p["k"]
        return PreposteriorSummary(
            mean=k * a / b - p["c1"],
            variance=k**2 * a * N / (b**2 * (a + N + 1.0)),
            evsi=_exp_gamma_evsi(a, b, k, p["c0"] + p["c1"], N),
        )
    a_var = p["prior_var"]
    variance = 0.0 if N == 0 else p["k"] ** 2 * a_var**2 / (p["obs_var"] / N + a_var)
    return PreposteriorSummary(
        mean=p["k"] * p["theta0"] - p["c"],
        variance=variance,
        evsi=_normal_normal_evsi(p["theta0"], a_var, p["obs_var"], p["k"], p["c"], N),
    )


# -- toy decision models ------------------------------------------------------


def build_beta_binomial(k=20000.0, c=10000.0) -> DecisionModel:
    def net_benefit(cols):
        nb2 = k * cols["p_success"] - c
        return np.column_stack([np.zeros_like(nb2), nb2])

    return DecisionModel(
        name="beta_binomial",
        priors={"p_success": DistSpec("uniform", 0.0, 1.0)},
        n_treatments=2,
        net_benefit=net_benefit,
        comparison=(1, 0),
        params={"k": k, "c": c},
    )


def build_exp_gamma(alpha=5.0, beta=1.0, k=200.0, c0=900.0, c1=100.0) -> DecisionModel:
    def net_benefit(cols):
        nb1 = k * cols["event_rate"] - c1
        return np.column_stack([np.full_like(nb1, c0), nb1])

    return DecisionModel(
        name="exp_gamma",
        priors={"event_rate": DistSpec("gamma", alpha, beta)},
        n_treatments=2,
        net_benefit=net_benefit,
        comparison=(1, 0),
        params={"alpha": alpha, "beta": beta, "k": k, "c0": c0, "c1": c1},
    )


def build_normal_normal(theta0=0.0, prior_var=1.0, obs_var=1.0, k=10000.0, c=0.0) -> DecisionModel:
    def net_benefit(cols):
        nb1 = k * cols["effect"] - c
        return np.column_stack([np.zeros_like(nb1), nb1])

    return DecisionModel(
        name="normal_normal",
        priors={"effect": DistSpec("normal", theta0, prior_var)},
        n_treatments=2,
        net_benefit=net_benefit,
        comparison=(1, 0),
        params={"theta0": theta0, "prior_var": prior_var, "obs_var": obs_var, "k": k, "c": c},
    )


def build_quadratic_normal(prior_var=5.0, obs_var=10.0) -> DecisionModel:
    """Highly non-normal INB (a shifted chi-square) with a conjugate posterior.

    The default future study is 10 observations carrying total precision 1,
    which reproduces the reference preposterior variance of about 35 and the
    reference EVSI of about 2 used by the convergence experiments.
    """

    def net_benefit(cols):
        nb2 = cols["effect"] ** 2 - prior_var
        return np.column_stack([np.zeros_like(nb2), nb2])

    return DecisionModel(
        name="quadratic_normal",
        priors={"effect": DistSpec("normal", 0.0, prior_var)},
        n_treatments=2,
        net_benefit=net_benefit,
        comparison=(1, 0),
        params={"prior_var": prior_var, "obs_var": obs_var},
    )


def quadratic_posterior_var(model: DecisionModel, N: int) -> float:
    p = model.params
    return 1.0 / (1.0 / p["prior_var"] + N / p["obs_var"])


def quadratic_preposterior_variance(model: DecisionModel, N: int) -> float:
    tau2 = model.params["prior_var"] - quadratic_posterior_var(model, N)
    return 2.0 * tau2**2


def quadratic_exact_evsi(model: DecisionModel, N: int) -> float:
    tau2 = model.params["prior_var"] - quadratic_posterior_var(model, N)
    return float(tau2 * 2.0 * stats.norm.pdf(1.0))


def build_two_param_linear(k=10000.0) -> DecisionModel:
    """Two-parameter model whose conditional INB is linear in the focal input."""

    def net_benefit(cols):
        nb0 = k * cols["background"] - 4000.0
        nb1 = k * cols["response_rate"] - 6500.0
        return np.column_stack([nb0, nb1])

    return DecisionModel(
        name="two_param_linear",
        priors={
            "response_rate": DistSpec("beta", 1.0, 4.0),
            "background": DistSpec("normal", -0.5, 1.0),
        },
        n_treatments=2,
        net_benefit=net_benefit,
        comparison=(1, 0),
        params={"k": k},
    )


# -- toy study designs ---------------------------------------------------------


def _toy_trial_design(model: DecisionModel, n: int) -> StudyDesign:
    name = model.name
    if name == "beta_binomial":
        recipe = BetaBinomialUpdate("p_success", 1.0, 1.0, n, "x")
        k, c = model.params["k"], model.params["c"]

        def simulate(cols, seed):
            return {"x": seed.generator().binomial(n, cols["p_success"]).astype(float)}

        def inner(ds, seed=None, n_inner=0, burn_in=0):
            return k * recipe.exact_means(ds) - c

        return StudyDesign(
            name="trial", model_name=name, focal_params=("p_success",), sample_size=n,
            recipe=recipe, simulate_batch=simulate, summary_names=("x",),
            summarize_batch=lambda ds: ds["x"][:, None], batch_inner_means=inner,
            informs_all=True, is_discrete_data=True,
        )

    if name == "exp_gamma":
        p = model.params
        recipe = GammaExponentialUpdate("event_rate", p["alpha"], p["beta"], "obs")

        def simulate(cols, seed):
            gen = seed.generator()
            scale = 1.0 / np.asarray(cols["event_rate"], dtype=float)[:, None]
            return {"obs": gen.exponential(1.0, (scale.shape[0], n)) * scale}

        def inner(ds, seed=None, n_inner=0, burn_in=0):
            return p["k"] * recipe.exact_means(ds) - p["c1"] - p["c0"]

        return StudyDesign(
            name="trial", model_name=name, focal_params=("event_rate",), sample_size=n,
            recipe=recipe, simulate_batch=simulate, summary_names=("mean_obs",),
            summarize_batch=lambda ds: ds["obs"].mean(axis=1)[:, None],
            batch_inner_means=inner, informs_all=True,
        )

    if name == "normal_normal":
        p = model.params
        recipe = NormalNormalUpdate("effect", p["theta0"], p["prior_var"], p["obs_var"], "obs")

        def simulate(cols, seed):
            gen = seed.generator()
            loc = np.asarray(cols["effect"], dtype=float)[:, None]
            return {"obs": gen.normal(loc, np.sqrt(p["obs_var"]), (loc.shape[0], n))}

        def inner(ds, seed=None, n_inner=0, burn_in=0):
            return p["k"] * recipe.exact_means(ds) - p["c"]

        return StudyDesign(
            name="trial", model_name=name, focal_params=("effect",), sample_size=n,
            recipe=recipe, simulate_batch=simulate, summary_names=("mean_obs",),
            summarize_batch=lambda ds: ds["obs"].mean(axis=1)[:, None],
            batch_inner_means=inner, informs_all=True,
        )

    if name == "quadratic_normal":
        p = model.params
        recipe = NormalNormalUpdate("effect", 0.0, p["prior_var"], p["obs_var"], "obs")
        post_var = quadratic_posterior_var(model, n)

        def simulate(cols, seed):
            gen = seed.generator()
            loc = np.asarray(cols["effect"], dtype=float)[:, None]
            return {"obs": gen.normal(loc, np.sqrt(p["obs_var"]), (loc.shape[0], n))}

        def inner(ds, seed=None, n_inner=0, burn_in=0):
            mean, _ = recipe.posterior_params(ds)
            return np.atleast_1d(mean) ** 2 + post_var - p["prior_var"]

        return StudyDesign(
            name="trial", model_name=name, focal_params=("effect",), sample_size=n,
            recipe=recipe, simulate_batch=simulate, summary_names=("mean_obs",),
            summarize_batch=lambda ds: ds["obs"].mean(axis=1)[:, None],
            batch_inner_means=inner, informs_all=True,
        )

    if name == "two_param_linear":
        k = model.params["k"]
        recipe = BetaBinomialUpdate("response_rate", 1.0, 4.0, n, "x")

        def simulate(cols, seed):
            return {"x": seed.generator().binomial(n, cols["response_rate"]).astype(float)}

        def inner(ds, seed=None, n_inner=0, burn_in=0):
            # background has prior mean -0.5, so E[INB | x] = k * post + 2500
            return k * recipe.exact_means(ds) - 6500.0 - (k * -0.5 - 4000.0)

        return StudyDesign(
            name="trial", model_name=name, focal_params=("response_rate",), sample_size=n,
            recipe=recipe, simulate_batch=simulate, summary_names=("x",),
            summarize_batch=lambda ds: ds["x"][:, None], batch_inner_means=inner,
            is_discrete_data=True,
        )

    raise ConfigError(f"model {name!r} has no trial design")


def _null_design(model: DecisionModel, n: int = 10) -> StudyDesign:
    """Data independent of every parameter; the posterior equals the prior."""
    first = model.param_names[0]
    recipe = NullUpdate(first, model.priors[first])
    prior_mean_inb = _prior_mean_inb(model)

    def simulate(cols, seed):
        k = len(next(iter(cols.values())))
        return {"x": seed.generator().binomial(n, 0.5, k).astype(float)}

    def inner(ds, seed=None, n_inner=0, burn_in=0):
        return np.full(len(ds["x"]), prior_mean_inb)

    return StudyDesign(
        name="null", model_name=model.name, focal_params=(first,), sample_size=n,
        recipe=recipe, simulate_batch=simulate, summary_names=("x",),
        summarize_batch=lambda ds: ds["x"][:, None], batch_inner_means=inner,
        informs_all=len(model.param_names) == 1, is_discrete_data=True,
    )


def _prior_mean_inb(model: DecisionModel) -> float:
    name, p = model.name, model.params
    if name == "beta_binomial":
        return p["k"] / 2.0 - p["c"]
    if name == "exp_gamma":
        return p["k"] * p["alpha"] / p["beta"] - p["c0"] - p["c1"]
    if name == "normal_normal":
        return p["k"] * p["theta0"] - p["c"]
    if name == "quadratic_normal":
        return 0.0
    if name == "two_param_linear":
        return p["k"] * (0.2 + 0.5) - 2500.0
    if name == "ades":
        m = _ades_prior_means(p)
        return float(_ades_inb_at_means(m["Pc"], m["Pse"], m["Pt"], m["Qe"], p))
    raise ConfigError(f"no prior INB mean for {name!r}")


# ---------------------------------------------------------------------------
# registry

_MODEL_BUILDERS = {
    "ades": build_ades,
    "beta_binomial": build_beta_binomial,
    "exp_gamma": build_exp_gamma,
    "normal_normal": build_normal_normal,
    "quadratic_normal": build_quadratic_normal,
    "two_param_linear": build_two_param_linear,
}

_DEFAULT_TRIAL_SIZE = {
    "beta_binomial": 10,
    "exp_gamma": 10,
    "normal_normal": 9,
    "quadratic_normal": 10,
    "two_param_linear": 30,
}

_ADES_DESIGN_SIZE = {"study1": 60, "study2": 100, "study3": 200, "study4": 200}


def list_models() -> list[str]:
    return sorted(_MODEL_BUILDERS)


def get_model(name: str, **overrides) -> DecisionModel:
    try:
        builder = _MODEL_BUILDERS[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; registered models: {list_models()}") from None
    return builder(**overrides)


def list_designs(model_name: str) -> list[str]:
    if model_name == "ades":
        return ["study1", "study2", "study3", "study4"]
    return ["trial", "null"]


def get_design(model: DecisionModel, name: str | None = None, n: int | None = None,
               obs_var: float | None = None) -> StudyDesign:
    """Build a study design for `model`; `n` overrides the future sample size."""
    if model.name == "ades":
        name = name or "study1"
        if name not in _ADES_DESIGN_SIZE:
            raise ConfigError(
                f"unknown ades design {name!r}; available: {list_designs('ades')}"
            )
        size = n if n is not None else _ADES_DESIGN_SIZE[name]
        if name == "study1":
            return _ades_study1(model, size)
        if name == "study2":
            return _ades_study2(model, size, obs_var if obs_var is not None else 2.0)
        if name == "study3":
            return _ades_study3(model, size)
        return _ades_study4(model, size)

    name = name or "trial"
    size = n if n is not None else _DEFAULT_TRIAL_SIZE.get(model.name, 10)
    if name == "trial":
        if model.name == "quadratic_normal" and obs_var is not None:
            raise ConfigError("override obs_var on the model, not the design")
        return _toy_trial_design(model, size)
    if name == "null":
        return _null_design(model, size)
    raise ConfigError(
        f"unknown design {name!r} for model {model.name!r}; "
        f"available: {list_designs(model.name)}"
    )
