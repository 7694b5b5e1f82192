"""Ground-truth estimators used to validate the moment-matching engine.

* Nested Monte Carlo: outer draws of parameters and future data, an inner
  posterior mean of the INB per dataset (closed forms where the update is
  conjugate, ensemble Metropolis chains otherwise).
* Exact enumeration for the flat-prior Binomial toy.
* Closed-form preposterior law for the Normal-Normal toy.
* Regression on data summaries: simulate one dataset per PSA draw and smooth
  the INB against the dataset's low-dimensional summary statistics.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .casemodels import ConjugateToy, StudyDesign, _bb_enumeration_evsi
from .model import DecisionModel, InbSamples, PsaSamples, compute_inb, run_psa
from .regression import SplineSpec, fit_conditional_mean
from .rng import SeedSpec
from .util import BudgetExceededError, UnsupportedDimensionError

_OUTER_CHUNK = 50000


@dataclass
class OracleResult:
    method: str
    evsi: float
    standard_error: float
    n_outer: int = 0
    n_inner: int = 0
    wall_time: float = 0.0

    def __post_init__(self):
        if self.standard_error < 0:
            raise ValueError("standard_error must be nonnegative")


def _evsi_and_se(mu: np.ndarray) -> tuple[float, float]:
    """EVSI from preposterior means plus an outer-loop standard error."""
    grand = float(np.mean(mu))
    if grand > 0:
        integrand = np.maximum(mu, 0.0) - mu
    else:
        integrand = np.maximum(mu, 0.0)
    evsi_val = max(0.0, float(np.mean(np.maximum(mu, 0.0)) - max(0.0, grand)))
    se = float(np.std(integrand, ddof=1)) / np.sqrt(mu.size)
    return evsi_val, se


def nested_mc_evsi(
    model: DecisionModel,
    design: StudyDesign,
    n_outer: int,
    n_inner: int = 2000,
    seed: SeedSpec = SeedSpec(0),
    inner_burn_in: int = 500,
    budget_seconds: float | None = None,
) -> OracleResult:
    """Two-level EVSI: average the positive part of the preposterior mean.

    Inner posterior means come from the design's own strategy: exact
    conjugate means where available, chain means for sampler-based updates.
    A wall-time budget, when set, aborts with the completed outer count.
    """
    if n_outer < 100 or n_inner < 100:
        raise ValueError("n_outer and n_inner must both be >= 100")
    start = time.perf_counter()

    mus = []
    done = 0
    chunk_index = 0
    while done < n_outer:
        take = min(_OUTER_CHUNK, n_outer - done)
        chunk_seed = seed.derive(chunk_index)
        psa = run_psa(model, max(take, 2), chunk_seed.derive(0))
        cols = {k: v[:take] for k, v in psa.columns.items()}
        datasets = design.simulate_batch(cols, chunk_seed.derive(1))
        mus.append(
            np.asarray(
                design.batch_inner_means(
                    datasets, chunk_seed.derive(2), n_inner=n_inner, burn_in=inner_burn_in
                ),
                dtype=float,
            )
        )
        done += take
        chunk_index += 1
        if budget_seconds is not None and time.perf_counter() - start > budget_seconds:
            if done < n_outer:
                raise BudgetExceededError(completed=done, total=n_outer)

    mu = np.concatenate(mus)
    evsi_val, se = _evsi_and_se(mu)
    return OracleResult(
        method="nested_mc",
        evsi=evsi_val,
        standard_error=se,
        n_outer=n_outer,
        n_inner=n_inner,
        wall_time=time.perf_counter() - start,
    )


def enumeration_evsi(toy: ConjugateToy) -> OracleResult:
    """Exact EVSI for the flat-prior Binomial toy by summing all N+1 outcomes."""
    if toy.variant != "beta_binomial_uniform":
        raise UnsupportedDimensionError(
            f"enumeration supports only beta_binomial_uniform, not {toy.variant!r}"
        )
    if toy.N > 10**6:
        raise ValueError("enumeration limited to N <= 1e6")
    start = time.perf_counter()
    value = _bb_enumeration_evsi(toy.params["k"], toy.params["c"], toy.N)
    return OracleResult(
        method="analytic_enumeration",
        evsi=value,
        standard_error=0.0,
        n_outer=toy.N + 1,
        wall_time=time.perf_counter() - start,
    )


def closed_form_normal_evsi(toy: ConjugateToy) -> OracleResult:
    """Exact EVSI for the Normal-Normal toy via the unit normal loss function."""
    if toy.variant != "normal_normal":
        raise UnsupportedDimensionError("closed form applies to the normal_normal toy")
    p, N = toy.params, toy.N
    m = p["k"] * p["theta0"] - p["c"]
    if N == 0:
        value = 0.0
    else:
        s = np.sqrt(p["k"] ** 2 * p["prior_var"] ** 2 / (p["obs_var"] / N + p["prior_var"]))
        value = max(0.0, float(s * stats.norm.pdf(m / s) + m * stats.norm.cdf(m / s)) - max(0.0, m))
    return OracleResult(method="closed_form_normal", evsi=value, standard_error=0.0)


def regression_on_summaries_evsi(
    model: DecisionModel,
    design: StudyDesign,
    psa: PsaSamples,
    seed: SeedSpec = SeedSpec(0),
    n_bootstrap: int = 20,
    spline: SplineSpec | None = None,
) -> OracleResult:
    """Smooth the INB against per-draw simulated dataset summaries.

    One future dataset is simulated for every PSA row; the fitted surface is
    the preposterior-mean estimate.  The standard error comes from refitting
    under multinomial bootstrap weights at the selected penalty.
    """
    if len(design.summary_names) > 3:
        raise UnsupportedDimensionError("summary dimension > 3 unsupported")
    start = time.perf_counter()
    inb = compute_inb(model, psa)
    datasets = design.simulate_batch(psa.columns, seed.derive(0))
    summaries = np.asarray(design.summarize_batch(datasets), dtype=float)

    work = InbSamples(inb_theta=inb.inb_theta.copy())
    fit = fit_conditional_mean(work, summaries, spec=spline, names=design.summary_names)
    evsi_val = max(
        0.0, float(np.mean(np.maximum(fit.fitted, 0.0)) - max(0.0, np.mean(fit.fitted)))
    )

    se = 0.0
    if n_bootstrap > 1:
        gen = seed.derive(1).generator()
        n = inb.inb_theta.size
        reps = np.empty(n_bootstrap)
        for b in range(n_bootstrap):
            w = gen.multinomial(n, np.full(n, 1.0 / n)).astype(float)
            boot = InbSamples(inb_theta=inb.inb_theta.copy())
            bfit = fit_conditional_mean(
                boot, summaries, spec=spline, names=design.summary_names,
                sample_weight=w, penalty_weight=fit.penalty_weight,
            )
            reps[b] = np.mean(np.maximum(bfit.fitted, 0.0)) - max(0.0, np.mean(bfit.fitted))
        se = float(np.std(reps, ddof=1))

    return OracleResult(
        method="regression_on_summaries",
        evsi=evsi_val,
        standard_error=se,
        n_outer=psa.n_draws,
        wall_time=time.perf_counter() - start,
    )
