"""BIC evidence, posterior model probabilities and degree selection.

The maximum-entropy fit is scored like any other parametric model, so
including it as "model 0" in a comparison turns posterior probabilities
into an absolute goodness-of-fit check: if model 0 dominates, every rival
fits poorly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import Dataset
from .errors import AllFitsFailedError, MaxEntError
from .solver import MaxEntFit, SolverConfig, fit_maxent
from .support import SupportRegion

log = logging.getLogger(__name__)

BENCHMARK_ID = "0"


@dataclass(frozen=True)
class ModelScore:
    model_id: str
    log_likelihood: float
    k_params: int
    evidence: float
    posterior: float

    def to_dict(self) -> dict:
        return {
            "id": self.model_id,
            "logL": self.log_likelihood,
            "K": self.k_params,
            "evidence": self.evidence,
            "posterior": self.posterior,
        }


@dataclass(frozen=True)
class Rival:
    """A competing model summarized by its maximized log-likelihood."""

    name: str
    log_likelihood: float
    k_params: int


RivalLike = Union[Rival, Tuple[str, float, int], Tuple[float, int]]


def evidence(log_likelihood: float, k_params: int, n: int) -> float:
    """Schwarz evidence  logL - K/2 log N  (minus one half of BIC)."""
    if n < 2:
        raise ValueError(f"sample size must be >= 2 for the log N penalty, got {n}")
    if k_params < 0:
        raise ValueError("k_params must be nonnegative")
    return float(log_likelihood) - 0.5 * k_params * math.log(n)


def posterior_probabilities(evidences: Sequence[float]) -> List[float]:
    """Posterior model probabilities under a uniform prior: softmax of evidences.

    Models with evidence ``-inf`` get probability zero.
    """
    e = np.asarray(list(evidences), dtype=float)
    if e.size == 0:
        raise ValueError("need at least one model")
    if np.any(np.isnan(e)) or np.any(e == np.inf):
        raise ValueError("evidences must be finite or -inf")
    top = e.max()
    if top == -np.inf:
        raise ValueError("every model has evidence -inf")
    w = np.exp(e - top)
    return (w / w.sum()).tolist()


def _as_rival(r: RivalLike, i: int) -> Rival:
    if isinstance(r, Rival):
        return r
    if len(r) == 2:
        return Rival(str(i + 1), float(r[0]), int(r[1]))
    return Rival(str(r[0]), float(r[1]), int(r[2]))


def _score(ids, loglik, ks, evs) -> List[ModelScore]:
    post = posterior_probabilities(evs)
    return [ModelScore(i, float(l), int(k), float(e), p) for i, l, k, e, p in zip(ids, loglik, ks, evs, post)]


def compare_unconditional(
    data: Dataset, benchmark: MaxEntFit, rivals: Iterable[RivalLike] = ()
) -> List[ModelScore]:
    """Score the maximum-entropy benchmark (model 0) against rival densities.

    Rival log-likelihoods must be evaluated on ``data`` by the caller.
    """
    benchmark.require_converged()
    if benchmark.moments.n != data.n_rows:
        raise ValueError(
            f"benchmark was fitted on {benchmark.moments.n} rows but data has {data.n_rows}"
        )
    rivals = [_as_rival(r, i) for i, r in enumerate(rivals)]
    n = data.n_rows
    ids = [BENCHMARK_ID] + [r.name for r in rivals]
    logl = [benchmark.log_likelihood] + [r.log_likelihood for r in rivals]
    ks = [benchmark.n_params] + [r.k_params for r in rivals]
    return _score(ids, logl, ks, [evidence(l, k, n) for l, k in zip(logl, ks)])


def conditional_benchmark(oie_joint: MaxEntFit, oie_marginal: MaxEntFit, n: int) -> Tuple[float, int, float]:
    """``(log-likelihood difference, parameter difference, evidence)`` of model 0.

    The conditional benchmark's log-likelihood is the joint fit's on (X, Y)
    minus the marginal fit's on X, with K_{X,Y} - K_X parameters.
    """
    for name, fit in (("joint", oie_joint), ("marginal", oie_marginal)):
        fit.require_converged()
    if oie_joint.basis.max_degree != oie_marginal.basis.max_degree:
        raise ValueError(
            f"joint fit has degree {oie_joint.basis.max_degree} but marginal has "
            f"{oie_marginal.basis.max_degree}; K_XY - K_X would not count the response terms"
        )
    if oie_marginal.basis.dim != oie_joint.basis.dim - 1:
        raise ValueError("marginal fit must cover all joint coordinates except the last")
    if oie_joint.support.kind != oie_marginal.support.kind:
        raise ValueError("joint and marginal fits must use the same support family")
    if oie_joint.moments.n != n or oie_marginal.moments.n != n:
        raise ValueError("joint and marginal fits must use the same N rows as the data")
    dl = oie_joint.log_likelihood - oie_marginal.log_likelihood
    dk = oie_joint.n_params - oie_marginal.n_params
    return dl, dk, evidence(dl, dk, n)


def compare_conditional(
    data: Dataset,
    rivals: Iterable[RivalLike],
    oie_joint: MaxEntFit,
    oie_marginal: MaxEntFit,
) -> List[ModelScore]:
    """Posterior probabilities of conditional models f(y | x) against model 0.

    ``data`` holds X in the leading columns and Y last. Rival entries carry
    conditional log-likelihoods only; the X log-likelihood common to all
    models cancels from the posterior and never enters.
    """
    rivals = [_as_rival(r, i) for i, r in enumerate(rivals)]
    n = data.n_rows
    if oie_joint.basis.dim != data.dim:
        raise ValueError("joint fit dimension does not match the data")
    dl, dk, e0 = conditional_benchmark(oie_joint, oie_marginal, n)
    ids = [BENCHMARK_ID] + [r.name for r in rivals]
    logl = [dl] + [r.log_likelihood for r in rivals]
    ks = [dk] + [r.k_params for r in rivals]
    return _score(ids, logl, ks, [e0] + [evidence(r.log_likelihood, r.k_params, n) for r in rivals])


@dataclass(frozen=True)
class DegreeResult:
    degree: int
    fit: Optional[MaxEntFit]
    log_likelihood: float
    evidence: float
    error: Optional[str] = None

    @property
    def converged(self) -> bool:
        return self.fit is not None and self.fit.converged


@dataclass(frozen=True)
class DegreeSweepResult:
    results: Tuple[DegreeResult, ...]
    selected_degree: int

    @property
    def best(self) -> MaxEntFit:
        return next(r.fit for r in self.results if r.degree == self.selected_degree)


def sweep_degrees(
    data: Dataset,
    support: SupportRegion,
    degrees: Sequence[int] = (2, 4, 6, 8, 10),
    config: Optional[SolverConfig] = None,
    nodes_per_dim: Optional[int] = None,
    allow_odd: bool = False,
) -> DegreeSweepResult:
    """Fit every degree on one grid resolution and keep the highest evidence.

    Failed or unconverged degrees score ``-inf``; ties go to the smaller degree.
    """
    degrees = sorted(set(int(a) for a in degrees))
    if not degrees:
        raise ValueError("need at least one degree")
    for a in degrees:
        if a < 1 or (a < 2 and not allow_odd):
            raise ValueError(f"degree {a} must be >= 2")
        if a % 2 and not allow_odd:
            raise ValueError(f"degree {a} is odd; pass allow_odd=True to permit odd degrees")
    if nodes_per_dim is None:
        from .quadrature import default_nodes

        nodes_per_dim = max(default_nodes(data.dim, support.kind), degrees[-1] + 1)
    n = data.n_rows
    results = []
    for a in degrees:
        try:
            fit = fit_maxent(data, support, a, nodes_per_dim, config)
        except MaxEntError as exc:
            log.warning("degree %d failed: %s", a, exc)
            results.append(DegreeResult(a, None, -math.inf, -math.inf, str(exc)))
            continue
        if fit.converged:
            results.append(DegreeResult(a, fit, fit.log_likelihood, evidence(fit.log_likelihood, fit.n_params, n)))
        else:
            results.append(DegreeResult(a, fit, fit.log_likelihood, -math.inf, "not converged"))
    ok = [r for r in results if r.converged]
    if not ok:
        raise AllFitsFailedError(f"no degree in {degrees} produced a converged fit")
    best = max(ok, key=lambda r: (r.evidence, -r.degree))
    return DegreeSweepResult(tuple(results), best.degree)
