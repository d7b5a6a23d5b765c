"""Single-chain samplers over a posterior model: random-walk MH and HMC.

Both steps are pure functions of (model, state, mechanism, stream): replaying
a stream replays the trajectory bit for bit. A rejected step returns the
previous state object untouched. HMC trajectories whose energy error exceeds
DIVERGENCE_THRESHOLD are counted as divergent and treated as rejections;
they never abort the chain.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InsufficientSamples
from .linalg_rng import RngStream, SpdMatrix, sample_mvn

DIVERGENCE_THRESHOLD = 1000.0


@dataclass(frozen=True)
class GaussianProposal:
    """Symmetric random-walk kernel: x' = x + N(0, cov)."""

    cov: SpdMatrix


@dataclass(frozen=True)
class HmcParams:
    """Leapfrog settings: mass matrix, step size h, trajectory steps m.

    With ``jitter_steps`` the per-transition step count is drawn uniformly
    from 1..m (from the chain's own stream, so replays stay identical);
    this breaks the resonances a fixed trajectory length can lock into on
    near-harmonic targets.
    """

    mass: SpdMatrix
    step_size: float
    n_steps: int
    jitter_steps: bool = False

    def __post_init__(self):
        if not np.isfinite(self.step_size) or self.step_size <= 0.0:
            raise ValueError("step size must be positive and finite")
        if self.n_steps < 1:
            raise ValueError("at least one leapfrog step required")


@dataclass
class ChainConfig:
    """Budget and bookkeeping for one chain.

    Total steps executed = burn_in + stride * n_samples; every stride-th
    post-burn-in state is recorded.
    """

    n_samples: int
    initial_state: np.ndarray
    rng: RngStream
    burn_in: int = 100
    stride: int = 5

    def __post_init__(self):
        self.initial_state = np.asarray(self.initial_state, dtype=float).reshape(-1)
        if self.n_samples < 0 or self.burn_in < 0 or self.stride < 1:
            raise ValueError("invalid chain budget")

    @property
    def total_steps(self):
        return self.burn_in + self.stride * self.n_samples


@dataclass
class ChainResult:
    samples: np.ndarray
    proposals_made: int
    proposals_accepted: int
    divergences: int = 0
    wall_time: float = 0.0
    cpu_time: float = 0.0
    component: int = -1
    stream_id: int = -1

    @property
    def acceptance_rate(self):
        if self.proposals_made == 0:
            return 0.0
        return self.proposals_accepted / self.proposals_made

    @property
    def n_samples(self):
        return self.samples.shape[0]


class MhStep(NamedTuple):
    state: np.ndarray
    accepted: bool
    log_target: float


class HmcStep(NamedTuple):
    state: np.ndarray
    accepted: bool
    potential: float
    divergent: bool


def mh_step(model, x, proposal, rng, log_target=None):
    """One Metropolis step with a symmetric Gaussian proposal.

    The proposal kernel is symmetric, so the acceptance ratio reduces to the
    target ratio: a = min(1, exp(logpi(x') - logpi(x))). Accept when a > u.
    ``log_target`` carries the current state's log target to avoid a second
    evaluation per step; it is computed when omitted.
    """
    if log_target is None:
        log_target = model.unnormalized_log_posterior(x)
    step = sample_mvn(rng, np.zeros(x.shape[0]), proposal.cov)
    candidate = x + step
    log_target_new = model.unnormalized_log_posterior(candidate)
    a = min(1.0, np.exp(min(0.0, log_target_new - log_target)))
    if a > rng.uniform():
        return MhStep(candidate, True, log_target_new)
    return MhStep(x, False, log_target)


def leapfrog(model, x, p, mass, step_size, n_steps):
    """Leapfrog integration of (x, p) under H = 0.5 p^T M^-1 p + J(x)."""
    x = np.array(x, dtype=float)
    p = np.array(p, dtype=float)
    p -= 0.5 * step_size * model.grad_neg_log_posterior(x)
    for i in range(n_steps):
        x += step_size * mass.solve(p)
        if i < n_steps - 1:
            p -= step_size * model.grad_neg_log_posterior(x)
    p -= 0.5 * step_size * model.grad_neg_log_posterior(x)
    return x, p


def hmc_step(model, x, params, rng, potential=None):
    """One HMC transition: momentum refresh, leapfrog flight, accept test.

    Accepts with probability min(1, exp(-dH)). A non-finite or huge |dH|
    marks the trajectory divergent: the step is rejected and flagged.
    """
    if potential is None:
        potential = model.neg_log_posterior(x)
    n_steps = params.n_steps
    if params.jitter_steps:
        n_steps = 1 + int(rng.uniform() * params.n_steps)
        n_steps = min(n_steps, params.n_steps)
    p0 = sample_mvn(rng, np.zeros(x.shape[0]), params.mass)
    h0 = potential + 0.5 * params.mass.maha_sq(p0)
    # Overflow in an exploding trajectory is handled by the divergence guard.
    with np.errstate(over="ignore", invalid="ignore"):
        x_new, p_new = leapfrog(model, x, p0, params.mass, params.step_size, n_steps)
        potential_new = model.neg_log_posterior(x_new)
        h1 = potential_new + 0.5 * params.mass.maha_sq(p_new)
    delta = h1 - h0
    if not np.isfinite(delta) or abs(delta) > DIVERGENCE_THRESHOLD:
        return HmcStep(x, False, potential, True)
    a = min(1.0, np.exp(min(0.0, -delta)))
    if a > rng.uniform():
        return HmcStep(x_new, True, potential_new, False)
    return HmcStep(x, False, potential, False)


def run_chain(model, config, mechanism):
    """Drive one chain for burn_in + stride * n_samples steps.

    ``mechanism`` is either a GaussianProposal or HmcParams. Divergent HMC
    steps are counted, never raised. The output is a pure function of
    (model, config, mechanism) including the stream.
    """
    wall_start = time.perf_counter()
    cpu_start = time.process_time()
    x = config.initial_state.copy()
    rng = config.rng
    gaussian = isinstance(mechanism, GaussianProposal)
    carried = (
        model.unnormalized_log_posterior(x) if gaussian else model.neg_log_posterior(x)
    )
    samples = np.empty((config.n_samples, x.size))
    accepted = 0
    divergences = 0
    recorded = 0
    for step in range(1, config.total_steps + 1):
        if gaussian:
            x, ok, carried = mh_step(model, x, mechanism, rng, carried)
        else:
            x, ok, carried, divergent = hmc_step(model, x, mechanism, rng, carried)
            divergences += divergent
        accepted += ok
        if step > config.burn_in and (step - config.burn_in) % config.stride == 0:
            samples[recorded] = x
            recorded += 1
    return ChainResult(
        samples=samples,
        proposals_made=config.total_steps,
        proposals_accepted=accepted,
        divergences=divergences,
        wall_time=time.perf_counter() - wall_start,
        cpu_time=time.process_time() - cpu_start,
        stream_id=rng.stream_id,
    )


@dataclass
class ChainDiagnostics:
    acceptance_rate: float
    autocorrelation: np.ndarray  # (n_lags, dim)
    ess: np.ndarray  # per coordinate
    degenerate: bool = False

    @property
    def ess_min(self):
        return float(np.min(self.ess))


def _autocorrelation(series, max_lag):
    n = series.size
    centered = series - series.mean()
    var = float(centered @ centered) / n
    if var == 0.0:
        return None
    acf = np.empty(max_lag + 1)
    for lag in range(max_lag + 1):
        acf[lag] = float(centered[: n - lag] @ centered[lag:]) / (n * var)
    return acf

def _ess_initial_positive(acf, n):
    # Sum paired autocorrelations while the pairs stay positive.
    tau = 1.0
    m = 1
    while m + 1 < acf.size:
        pair = acf[m] + acf[m + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        m += 2
    return n / tau


def chain_diagnostics(result, max_lag=None):
    """Acceptance rate, lag autocorrelations, and an initial-positive-sequence
    effective-sample-size estimate per coordinate.

    A coordinate with zero variance (a constant chain) is flagged degenerate
    and reported with ESS zero.
    """
    samples = result.samples
    n = samples.shape[0]
    if n < 2:
        raise InsufficientSamples("autocorrelation needs at least two samples")
    if max_lag is None:
        max_lag = min(n - 1, max(50, n // 5))
    dim = samples.shape[1]
    acfs = np.zeros((max_lag + 1, dim))
    ess = np.zeros(dim)
    degenerate = False
    for d in range(dim):
        acf = _autocorrelation(samples[:, d], max_lag)
        if acf is None:
            degenerate = True
            acfs[:, d] = np.nan
            ess[d] = 0.0
            continue
        acfs[:, d] = acf
        ess[d] = min(_ess_initial_positive(acf, n), float(n))
    return ChainDiagnostics(result.acceptance_rate, acfs, ess, degenerate)
