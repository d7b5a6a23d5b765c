"""Multi-chain MCMC orchestration: one chain per prior mixture component.

Chains are planned deterministically from (model, seed): budgets by
component weight times the likelihood of the component mean, initial states
at the component means, proposal tuning from the local component statistics,
and one random stream per chain keyed by its component index. Execution
placement (serial, threads, or a process pool) never changes the gathered
ensemble: streams are per chain and the gather runs in chain order.
"""

from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cost_model import CostModelInput, predict_cost
from .errors import BudgetInfeasibleWarning, OversubscribedWarning
from .gmm import Ensemble
from .linalg_rng import RngStream, SpdMatrix
from .samplers import ChainConfig, GaussianProposal, HmcParams, run_chain

# Standard random-walk scaling; experiment configs override it where a
# target acceptance rate is being reproduced.
DEFAULT_PROPOSAL_SCALE_NUMERATOR = 2.38**2

DEFAULT_HMC_STEPS = 20
DEFAULT_HMC_TRAJECTORY = 1.0  # in local posterior-std units


@dataclass(frozen=True)
class ChainPlan:
    component: int
    budget: int
    initial_state: np.ndarray
    mechanism: object  # GaussianProposal | HmcParams
    stream_id: int
    log_weight: float  # unnormalized log pooling weight of the component


@dataclass
class SchedulerPlan:
    chains: list
    workers: int
    assignment: np.ndarray  # worker index per chain
    burn_in: int
    stride: int
    seed: int

    @property
    def n_samples(self):
        return sum(c.budget for c in self.chains)


@dataclass
class ChainFailure:
    component: int
    stream_id: int
    error: str


@dataclass
class McmcResult:
    ensemble: Ensemble
    chain_results: list  # ChainResult or ChainFailure, in chain order
    acceptance_rate: float
    proposals_made: int
    proposals_accepted: int
    divergences: int
    wall_time: float


def allocate_budgets(model, n_ens):
    """Per-component sample budgets: n_i proportional to the component weight
    times the likelihood of the component mean.

    Largest-remainder rounding makes the budgets sum to n_ens exactly; when
    n_ens >= n_c every chain keeps at least one sample (taken from the
    largest budgets). With n_ens < n_c zero-budget chains are allowed and a
    BudgetInfeasibleWarning is emitted.
    """
    prior = model.prior
    n_c = prior.n_components
    if n_ens < 1:
        raise ValueError("n_ens must be at least 1")
    log_scores = np.array(
        [
            np.log(prior.weights[i]) + model.log_likelihood(prior.means[i])
            for i in range(n_c)
        ]
    )
    shifted = np.exp(log_scores - np.max(log_scores))
    fractions = shifted / np.sum(shifted)
    target = fractions * n_ens
    budgets = np.floor(target).astype(int)
    remainder = n_ens - int(np.sum(budgets))
    if remainder > 0:
        order = np.argsort(-(target - budgets), kind="stable")
        budgets[order[:remainder]] += 1
    if n_ens >= n_c:
        while np.any(budgets == 0):
            budgets[int(np.argmax(budgets))] -= 1
            budgets[int(np.argmin(budgets))] += 1
    else:
        warnings.warn(
            f"ensemble size {n_ens} below chain count {n_c}; "
            "zero-budget chains allowed",
            BudgetInfeasibleWarning,
        )
    return budgets


def tune_gaussian_proposal(component_cov, scale):
    return GaussianProposal(component_cov.scaled(scale))


def tune_hmc(component_cov, trajectory, n_steps, jitter=False):
    """HMC tuning from local component statistics: the mass matrix is the
    diagonal component precision, and h*m covers ``trajectory`` local
    standard-deviation units."""
    mass = SpdMatrix.from_diagonal(1.0 / component_cov.diagonal())
    return HmcParams(mass, float(trajectory) / n_steps, int(n_steps), jitter_steps=jitter)


def round_robin_assignment(n_chains, workers):
    return np.arange(n_chains) % workers


def balanced_assignment(budgets, workers):
    """Longest-processing-time-first: largest budgets go to the least
    loaded worker."""
    budgets = np.asarray(budgets)
    assignment = np.zeros(budgets.size, dtype=int)
    loads = np.zeros(workers)
    for idx in np.argsort(-budgets, kind="stable"):
        w = int(np.argmin(loads))
        assignment[idx] = w
        loads[w] += budgets[idx]
    return assignment


def build_plan(
    model,
    n_ens,
    mechanism,
    seed,
    *,
    workers=1,
    burn_in=100,
    stride=5,
    proposal_scale=None,
    hmc_trajectory=DEFAULT_HMC_TRAJECTORY,
    hmc_steps=DEFAULT_HMC_STEPS,
    hmc_jitter=False,
    budgets="likelihood",
    balance=False,
):
    """Plan one chain per prior mixture component.

    ``mechanism`` is "gaussian" or "hmc". ``budgets`` is "likelihood"
    (component weight times likelihood of the mean) or "uniform" (equal
    split, the idealized division the cost model assumes). The plan is
    independent of ``workers`` except for the chain-to-worker assignment.
    """
    prior = model.prior
    n_c = prior.n_components
    if mechanism not in ("gaussian", "hmc"):
        raise ValueError("mechanism must be 'gaussian' or 'hmc'")
    if budgets == "likelihood":
        counts = allocate_budgets(model, n_ens)
    elif budgets == "uniform":
        counts = np.full(n_c, n_ens // n_c, dtype=int)
        counts[: n_ens % n_c] += 1
    else:
        raise ValueError("budgets must be 'likelihood' or 'uniform'")
    if proposal_scale is None:
        proposal_scale = DEFAULT_PROPOSAL_SCALE_NUMERATOR / prior.dim

    log_scores = np.array(
        [
            np.log(prior.weights[i]) + model.log_likelihood(prior.means[i])
            for i in range(n_c)
        ]
    )
    chains = []
    for i in range(n_c):
        cov = prior.covariances[i]
        if mechanism == "gaussian":
            mech = tune_gaussian_proposal(cov, proposal_scale)
        else:
            mech = tune_hmc(cov, hmc_trajectory, hmc_steps, jitter=hmc_jitter)
        chains.append(
            ChainPlan(
                component=i,
                budget=int(counts[i]),
                initial_state=np.array(prior.means[i], dtype=float),
                mechanism=mech,
                stream_id=i,
                log_weight=float(log_scores[i]),
            )
        )
    if balance:
        assignment = balanced_assignment(counts, workers)
    else:
        assignment = round_robin_assignment(n_c, workers)
    return SchedulerPlan(
        chains=chains,
        workers=int(workers),
        assignment=assignment,
        burn_in=int(burn_in),
        stride=int(stride),
        seed=int(seed),
    )


def _execute_chain(model, chain, burn_in, stride, seed):
    try:
        config = ChainConfig(
            n_samples=chain.budget,
            initial_state=chain.initial_state,
            rng=RngStream(seed, chain.stream_id),
            burn_in=burn_in,
            stride=stride,
        )
        result = run_chain(model, config, chain.mechanism)
        result.component = chain.component
        return result
    except Exception as exc:  # a failed chain must never abort its siblings
        return ChainFailure(chain.component, chain.stream_id, repr(exc))


def _execute_worker_batch(model, chains, burn_in, stride, seed):
    return [_execute_chain(model, c, burn_in, stride, seed) for c in chains]


class WorkerPool:
    """Fixed pool of workers executing whole per-worker chain batches.

    Modes: "serial" (in the calling thread), "thread", or "process" (forked
    OS processes where available). The gathered output is identical across
    modes and worker counts.
    """

    def __init__(self, size, mode="process"):
        if mode not in ("serial", "thread", "process"):
            raise ValueError("mode must be serial, thread, or process")
        self.size = max(1, int(size))
        self.mode = mode if self.size > 1 else "serial"
        self._executor = None
        if self.mode == "thread":
            self._executor = ThreadPoolExecutor(max_workers=self.size)
        elif self.mode == "process":
            import multiprocessing

            try:
                ctx = multiprocessing.get_context("fork")
            except ValueError:
                ctx = multiprocessing.get_context()
            self._executor = ProcessPoolExecutor(max_workers=self.size, mp_context=ctx)

    def warm_up(self):
        """Spin workers up before timing anything."""
        if self._executor is not None:
            futures = [self._executor.submit(int, i) for i in range(self.size)]
            for f in futures:
                f.result()

    def run_batches(self, model, batches, burn_in, stride, seed):
        if self._executor is None:
            return [
                _execute_worker_batch(model, batch, burn_in, stride, seed)
                for batch in batches
            ]
        futures = [
            self._executor.submit(_execute_worker_batch, model, batch, burn_in, stride, seed)
            for batch in batches
        ]
        return [f.result() for f in futures]

    def close(self):
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def run_mc_mcmc(model, plan, pool=None, pooling="weighted"):
    """Execute all planned chains and gather a weighted posterior ensemble.

    Zero-budget chains are skipped. Samples are pooled in chain order; with
    ``pooling="weighted"`` each sample carries an importance weight
    proportional to its component's pooling weight divided by the chain
    budget, normalized over the pool, while ``pooling="uniform"`` weights
    every pooled sample equally. The pooled ensemble is bit-identical for
    any worker count or pool mode.
    """
    if pooling not in ("weighted", "uniform"):
        raise ValueError("pooling must be 'weighted' or 'uniform'")
    own_pool = pool is None
    if own_pool:
        pool = WorkerPool(plan.workers, mode="serial")
    try:
        active = []
        batches = [[] for _ in range(plan.workers)]
        for i, chain in enumerate(plan.chains):
            if chain.budget > 0:
                active.append(chain)
                batches[plan.assignment[i]].append(chain)
        batches = [b for b in batches if b]

        start = time.perf_counter()
        batch_results = pool.run_batches(model, batches, plan.burn_in, plan.stride, plan.seed)
        wall = time.perf_counter() - start

        by_component = {}
        for batch in batch_results:
            for result in batch:
                by_component[result.component] = result
        ordered = [by_component[c.component] for c in active]

        samples = []
        log_weights = []
        made = accepted = divergences = 0
        for chain, result in zip(active, ordered):
            if isinstance(result, ChainFailure):
                continue
            samples.append(result.samples)
            log_weights.append(
                np.full(result.n_samples, chain.log_weight - math.log(chain.budget))
            )
            made += result.proposals_made
            accepted += result.proposals_accepted
            divergences += result.divergences
        if samples:
            pooled = np.concatenate(samples, axis=0)
            if pooling == "uniform":
                weights = np.full(pooled.shape[0], 1.0 / pooled.shape[0])
            else:
                logw = np.concatenate(log_weights)
                logw -= np.max(logw)
                weights = np.exp(logw)
                weights /= np.sum(weights)
            ensemble = Ensemble(pooled, weights)
        else:
            ensemble = Ensemble(np.empty((0, model.dim)))
        return McmcResult(
            ensemble=ensemble,
            chain_results=ordered,
            acceptance_rate=(accepted / made) if made else 0.0,
            proposals_made=made,
            proposals_accepted=accepted,
            divergences=divergences,
            wall_time=wall,
        )
    finally:
        if own_pool:
            pool.close()


@dataclass
class BenchmarkRow:
    workers: int
    wall_s: float
    speedup: float
    efficiency: float
    pred_speedup: float
    pred_efficiency: float
    oversubscribed: bool = False


def benchmark_speedup(
    model,
    n_ens,
    mechanism,
    p_values,
    *,
    seed,
    repetitions=3,
    burn_in=100,
    stride=5,
    budgets="uniform",
    balance=False,
    pool_mode="process",
    cost_input=None,
    **plan_kwargs,
):
    """Measure wall time of run_mc_mcmc over worker counts with fixed seeds.

    Pools are created and warmed before timing; the wall time is the best of
    ``repetitions``. Measured speedup is wall(1) / wall(p). Predicted
    columns come from the cost model's integral-work variant, normalized by
    its own p = 1 value so prediction and measurement share the multi-chain
    baseline (the serial-chain baseline differs by the per-chain burn-in,
    which the cost model reports as overhead). Requesting more workers than
    logical processors flags the rows and warns.
    """
    p_values = list(p_values)
    if not p_values:
        raise ValueError("p_values must be non-empty")
    available = os.cpu_count() or 1
    oversubscribed = max(p_values) > available
    if oversubscribed:
        warnings.warn(
            f"benchmark requests up to {max(p_values)} workers on "
            f"{available} logical processors",
            OversubscribedWarning,
        )

    n_c = model.prior.n_components
    rows = []
    baseline = None
    pred_baseline = None
    for p in sorted(set(p_values) | {1}):
        plan = build_plan(
            model,
            n_ens,
            mechanism,
            seed,
            workers=p,
            burn_in=burn_in,
            stride=stride,
            budgets=budgets,
            balance=balance,
            **plan_kwargs,
        )
        with WorkerPool(p, mode=pool_mode) as pool:
            pool.warm_up()
            best = math.inf
            for _ in range(max(1, repetitions)):
                result = run_mc_mcmc(model, plan, pool=pool)
                best = min(best, result.wall_time)
        if p == 1:
            baseline = best
        if cost_input is None:
            base_input = CostModelInput(
                workers=p,
                n_components=n_c,
                n_ens=n_ens,
                n_var=model.dim,
                burn_in=burn_in,
                stride=stride,
                proposal="diagonal" if mechanism == "gaussian" else "hmc",
            )
        else:
            base_input = CostModelInput(
                **{
                    **cost_input.__dict__,
                    "workers": p,
                    "n_components": n_c,
                }
            )
        report = predict_cost(base_input)
        if p == 1:
            pred_baseline = report.parallel_cost_integral
        pred_speedup = pred_baseline / report.parallel_cost_integral
        if p in p_values:
            rows.append(
                BenchmarkRow(
                    workers=p,
                    wall_s=best,
                    speedup=baseline / best,
                    efficiency=baseline / best / p,
                    pred_speedup=pred_speedup,
                    pred_efficiency=pred_speedup / p,
                    oversubscribed=p > available,
                )
            )
    return rows


def benchmark_rows_to_csv(rows):
    lines = ["p,wall_s,speedup,efficiency,pred_speedup,pred_efficiency"]
    for row in rows:
        lines.append(
            f"{row.workers},{row.wall_s!r},{row.speedup!r},{row.efficiency!r},"
            f"{row.pred_speedup!r},{row.pred_efficiency!r}"
        )
    return "\n".join(lines) + "\n"
