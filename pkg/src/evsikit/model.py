"""Decision-model layer: priors, net benefit, PSA generation, INB and EVPI.

A :class:`DecisionModel` bundles independent named priors with a registered,
deterministic net-benefit function that maps parameter draws to one monetary
value per treatment.  All downstream estimators consume the simulation
containers produced here.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .rng import DistSpec, SeedSpec
from .util import SchemaError

_CHUNK = 1 << 16


@dataclass(frozen=True)
class DecisionModel:
    """Priors plus a pure net-benefit map.

    `net_benefit` takes a dict of named columns (prior draws plus any derived
    columns) and returns an (S, n_treatments) array.  `comparison` is the
    (r, s) treatment pair defining INB = NB_r - NB_s, with the new treatment
    first so that positive INB favours adoption.
    """

    name: str
    priors: dict[str, DistSpec]
    n_treatments: int
    net_benefit: Callable[[dict[str, np.ndarray]], np.ndarray]
    comparison: tuple[int, int] = (1, 0)
    derived: Callable[[dict[str, np.ndarray]], dict[str, np.ndarray]] | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        r, s = self.comparison
        if r == s:
            raise ValueError("comparison treatments must differ")
        if not (0 <= r < self.n_treatments and 0 <= s < self.n_treatments):
            raise ValueError("comparison indices out of range")

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(self.priors)

    def all_columns(self, prior_cols: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        """Input columns plus any derived columns not already supplied.

        Posterior updaters may hand in a derived column directly (a treatment
        probability informed by trial data, say); such columns take priority
        over recomputation from the raw inputs.
        """
        cols = dict(prior_cols)
        if self.derived is not None:
            for key, value in self.derived(cols).items():
                cols.setdefault(key, value)
        return cols


@dataclass
class PsaSamples:
    """S joint prior draws with named columns, plus any derived columns."""

    columns: dict[str, np.ndarray]
    param_names: tuple[str, ...]
    seed: SeedSpec

    def __post_init__(self):
        sizes = {v.shape[0] for v in self.columns.values()}
        if len(sizes) != 1:
            raise SchemaError("all columns must share one length")
        if self.n_draws < 2:
            raise SchemaError("PSA requires at least 2 draws")

    @property
    def n_draws(self) -> int:
        return next(iter(self.columns.values())).shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise SchemaError(f"unknown column {name!r}; have {sorted(self.columns)}") from None

    def matrix(self, names) -> np.ndarray:
        return np.column_stack([self.column(n) for n in names])


@dataclass
class InbSamples:
    """Per-draw incremental net benefit, optionally with fitted conditional values."""

    inb_theta: np.ndarray
    inb_phi: np.ndarray | None = None
    source_psa: PsaSamples | None = None
    net_benefits: np.ndarray | None = None
    phi_names: tuple | None = None

    def attach_phi(self, fitted: np.ndarray, names=None):
        """Attach regression-fitted conditional INB values, with sanity checks."""
        fitted = np.asarray(fitted, dtype=float)
        if fitted.shape != self.inb_theta.shape:
            raise SchemaError("fitted values must match inb_theta length")
        m_theta = float(np.mean(self.inb_theta))
        if abs(float(np.mean(fitted)) - m_theta) > 1e-6 * (1.0 + abs(m_theta)):
            raise SchemaError("fitted values do not preserve the INB mean")
        if np.var(fitted, ddof=1) > np.var(self.inb_theta, ddof=1) * (1.0 + 1e-6):
            raise SchemaError("fitted values exceed the INB variance")
        self.inb_phi = fitted
        self.phi_names = None if names is None else tuple(names)

    @classmethod
    def from_values(cls, values) -> "InbSamples":
        return cls(inb_theta=np.asarray(values, dtype=float))


def run_psa(model: DecisionModel, S: int, seed: SeedSpec, workers: int = 1) -> PsaSamples:
    """S independent joint draws from the priors.

    Generation is chunked with per-(column, chunk) derived streams, so the
    result is identical for any `workers` count and any scheduling order.
    """
    if S < 2:
        raise ValueError("S must be >= 2")
    names = model.param_names
    tasks = []
    for j, name in enumerate(names):
        col_seed = seed.derive(j)
        for c, lo in enumerate(range(0, S, _CHUNK)):
            tasks.append((name, model.priors[name], col_seed.derive(c), lo, min(lo + _CHUNK, S)))

    out = {name: np.empty(S) for name in names}

    def fill(task):
        name, dist, chunk_seed, lo, hi = task
        out[name][lo:hi] = dist.sample_with(chunk_seed.generator(), hi - lo)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, tasks))
    else:
        for task in tasks:
            fill(task)

    columns = model.all_columns(out)
    psa = PsaSamples(columns=columns, param_names=names, seed=seed)
    _check_support(model, psa)
    return psa


def _check_support(model: DecisionModel, psa: PsaSamples):
    for name, dist in model.priors.items():
        lo, hi = dist.support()
        col = psa.column(name)
        if col.min() < lo or col.max() > hi:
            raise SchemaError(f"column {name!r} violates its prior support")


def compute_inb(model: DecisionModel, psa: PsaSamples) -> InbSamples:
    """INB per draw for the model's comparison pair; deterministic given psa."""
    missing = [n for n in model.param_names if n not in psa.columns]
    if missing:
        raise SchemaError(f"psa columns missing parameters {missing}")
    nb = np.asarray(model.net_benefit(psa.columns), dtype=float)
    if nb.shape != (psa.n_draws, model.n_treatments):
        raise SchemaError(
            f"net_benefit returned shape {nb.shape}, "
            f"expected {(psa.n_draws, model.n_treatments)}"
        )
    r, s = model.comparison
    return InbSamples(inb_theta=nb[:, r] - nb[:, s], source_psa=psa, net_benefits=nb)


def evpi(inb) -> float:
    """Expected value of perfect information for a two-option comparison.

    mean(max(0, INB)) - max(0, mean(INB)); zero when the INB sign is certain.
    """
    x = inb.inb_theta if isinstance(inb, InbSamples) else np.asarray(inb, dtype=float)
    if x.size == 0:
        raise ValueError("evpi requires nonempty INB samples")
    return max(0.0, float(np.mean(np.maximum(x, 0.0)) - max(0.0, np.mean(x))))


def write_psa_csv(path, psa: PsaSamples, inb: InbSamples | None = None):
    """Parameter columns, one row per draw, then NB and INB columns."""
    headers = list(psa.param_names)
    cols = [psa.column(n) for n in psa.param_names]
    if inb is not None and inb.net_benefits is not None:
        for t in range(inb.net_benefits.shape[1]):
            headers.append(f"NB{t + 1}")
            cols.append(inb.net_benefits[:, t])
        headers.append("INB")
        cols.append(inb.inb_theta)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(headers)
        for row in zip(*cols):
            writer.writerow([repr(float(v)) for v in row])
