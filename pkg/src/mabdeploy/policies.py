"""Deployment-selection strategies.

The selection and update rules are exposed as small pure functions
(``select_ucb``, ``thompson_update`` ...) so they can be tested in isolation.
The ``*Policy`` classes wrap them behind one stateful interface used by the
simulator: ``add_model`` at chunk boundaries, ``select`` before each batch,
``observe`` after it.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import norm

from .core import ModelId, PolicySpec

SIGMA_FLOOR = 1e-6


@dataclass(frozen=True)
class NormalGammaParams:
    mu: float = 0.5
    kappa: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if not (self.kappa > 0 and self.beta > 0 and self.alpha > 0.5):
            raise ValueError(f"invalid Normal-Gamma parameters {self}")


@dataclass(frozen=True)
class ArmState:
    q_value: float = 1.0
    pull_count: int = 0
    mean_metric: float = 0.0
    validation_score: float = 0.0
    posterior: NormalGammaParams = field(default_factory=NormalGammaParams)
    last_metric: float | None = None


@dataclass(frozen=True)
class PolicyContext:
    available_models: tuple[ModelId, ...]
    global_batch_counter: int
    chunk_index: int
    previous_batch_metric: float | None = None
    batch_len: int = 1

    def __post_init__(self):
        m = self.available_models
        if not m or any(b <= a for a, b in zip(m, m[1:])):
            raise ValueError("available_models must be non-empty and strictly increasing")
        if self.global_batch_counter < 1:
            raise ValueError("global batch counter starts at 1")


def _argmax_lowest(models: Sequence[ModelId], values: Sequence[float]) -> ModelId:
    # np.argmax returns the first maximum, i.e. the lowest index
    return models[int(np.argmax(values))]


# ---------------------------------------------------------------------------
# naive / validation

def select_naive(ctx: PolicyContext) -> ModelId:
    return ctx.available_models[-1]


def select_validation(ctx: PolicyContext, states: Mapping[ModelId, ArmState], deployed: ModelId) -> ModelId:
    newest = ctx.available_models[-1]
    if newest != deployed and states[newest].validation_score > states[deployed].validation_score:
        return newest
    return deployed


# ---------------------------------------------------------------------------
# A/B testing

def required_sample_size(alpha: float, power: float, sigma: float, delta: float) -> int:
    """Fixed-horizon sample size ``((z_{1-alpha} + z_power) * sigma / delta)**2``, rounded up, at least 1."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not 0 < power < 1:
        raise ValueError("power must lie in (0, 1)")
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    if not delta > 0:
        raise ValueError("delta must be > 0")
    z = norm.ppf(1 - alpha) + norm.ppf(power)
    return max(1, math.ceil((z * sigma / delta) ** 2))


@dataclass(frozen=True)
class AbTestState:
    incumbent: ModelId
    challenger: ModelId
    required_n: int
    delta: float
    alpha: float = 0.05
    power: float = 0.8
    sigma_estimate: float = SIGMA_FLOOR
    collected: int = 0
    incumbent_sum: float = 0.0
    challenger_sum: float = 0.0

    def __post_init__(self):
        if self.incumbent == self.challenger:
            raise ValueError("incumbent and challenger must differ")
        if self.required_n < 1:
            raise ValueError("required_n must be positive")

    def means(self) -> tuple[float, float]:
        return self.incumbent_sum / self.collected, self.challenger_sum / self.collected


def ab_decide(s_incumbent: float, s_challenger: float, delta: float) -> bool:
    """True iff the challenger's relative improvement exceeds ``delta``.

    A zero incumbent metric makes the relative gain undefined; the challenger
    then has to clear ``delta`` in absolute terms.
    """
    if s_incumbent == 0:
        return s_challenger > delta
    return (s_challenger - s_incumbent) / s_incumbent > delta


def ab_step(state: AbTestState, incumbent_metric: float, challenger_metric: float,
            n_examples: int) -> tuple[AbTestState, ModelId | None]:
    """Add one batch to the test window.

    Returns the updated state and the winner once ``required_n`` examples have
    been collected (``None`` while still collecting). Interim gaps are never
    acted upon.
    """
    state = replace(
        state,
        collected=state.collected + n_examples,
        incumbent_sum=state.incumbent_sum + n_examples * incumbent_metric,
        challenger_sum=state.challenger_sum + n_examples * challenger_metric,
    )
    if state.collected < state.required_n:
        return state, None
    return state, ab_conclude(state)


def ab_conclude(state: AbTestState) -> ModelId:
    if state.collected == 0:
        return state.incumbent
    s_inc, s_ch = state.means()
    return state.challenger if ab_decide(s_inc, s_ch, state.delta) else state.incumbent


# ---------------------------------------------------------------------------
# epsilon-greedy

def epsilon_decay(epsilon0: float, lam: float, t: int) -> float:
    return epsilon0 / (1 + lam * t)


def update_q(state: ArmState, reward: float) -> ArmState:
    """Incremental mean; ``state.pull_count`` must already include this pull."""
    n = state.pull_count
    return replace(state, q_value=state.q_value + (reward - state.q_value) / n)


def select_epsilon_greedy(ctx: PolicyContext, states: Mapping[ModelId, ArmState], epsilon: float,
                          rng: np.random.Generator) -> ModelId:
    models = ctx.available_models
    if rng.random() < epsilon:
        return models[int(rng.integers(len(models)))]
    return _argmax_lowest(models, [states[m].q_value for m in models])


# ---------------------------------------------------------------------------
# UCB

def ucb_bonus(c: float, t: int, n: int) -> float:
    return c * math.sqrt(math.log(t) / n)


def select_ucb(ctx: PolicyContext, states: Mapping[ModelId, ArmState], c: float) -> ModelId:
    models = ctx.available_models
    for m in models:
        if states[m].pull_count == 0:
            return m
    t = ctx.global_batch_counter
    return _argmax_lowest(models, [states[m].mean_metric + ucb_bonus(c, t, states[m].pull_count) for m in models])


# ---------------------------------------------------------------------------
# Thompson sampling with a Normal-Gamma posterior per arm

def thompson_update(p: NormalGammaParams, x: float) -> NormalGammaParams:
    kappa = p.kappa + 1
    return NormalGammaParams(
        mu=(p.kappa * p.mu + x) / kappa,
        kappa=kappa,
        alpha=p.alpha + 0.5,
        beta=p.beta + p.kappa * (x - p.mu) ** 2 / (2 * kappa),
    )


def sample_normal_gamma(p: NormalGammaParams, rng: np.random.Generator, size=None):
    """Draw the mean: precision ~ Gamma(alpha, rate=beta), then Normal(mu, 1/(kappa*precision))."""
    tau = rng.gamma(p.alpha, 1.0 / p.beta, size=size)
    return rng.normal(p.mu, np.sqrt(1.0 / (p.kappa * tau)))


def thompson_sample(posteriors: Mapping[ModelId, NormalGammaParams], rng: np.random.Generator) -> ModelId:
    models = sorted(posteriors)
    draws = [sample_normal_gamma(posteriors[m], rng) for m in models]
    return _argmax_lowest(models, draws)


# ---------------------------------------------------------------------------
# stateful wrappers

Evaluate = Callable[[ModelId], "float | None"]


class Policy:
    name = "base"

    def __init__(self, spec: PolicySpec):
        self.spec = spec
        self.arms: dict[ModelId, ArmState] = {}
        self.prior = NormalGammaParams(spec.prior_mu, spec.prior_kappa, spec.prior_alpha, spec.prior_beta)

    def add_model(self, model: ModelId, validation_score: float) -> None:
        # optimistic start: an untried model looks like it always improves
        self.arms[model] = ArmState(q_value=self.spec.r_pos, validation_score=validation_score, posterior=self.prior)

    def select(self, ctx: PolicyContext, rng: np.random.Generator) -> ModelId:
        raise NotImplementedError

    def observe(self, ctx: PolicyContext, model: ModelId, metric: float, reward: float,
                evaluate: Evaluate | None = None) -> None:
        arm = self.arms[model]
        n = arm.pull_count + 1
        arm = replace(
            arm,
            pull_count=n,
            mean_metric=arm.mean_metric + (metric - arm.mean_metric) / n,
            posterior=thompson_update(arm.posterior, metric),
            last_metric=metric,
        )
        self.arms[model] = update_q(arm, reward)

    def extra_state(self) -> dict:
        return {}

    def snapshot(self) -> dict:
        return {
            "policy": self.name,
            "arms": {str(m): asdict(a) for m, a in sorted(self.arms.items())},
            **self.extra_state(),
        }

    def digest(self) -> str:
        blob = json.dumps(self.snapshot(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


class NaivePolicy(Policy):
    name = "naive"

    def select(self, ctx, rng):
        return select_naive(ctx)


class ValidationPolicy(Policy):
    name = "validation"

    def __init__(self, spec):
        super().__init__(spec)
        self.deployed: ModelId | None = None

    def add_model(self, model, validation_score):
        super().add_model(model, validation_score)
        if self.deployed is None:
            self.deployed = model

    def select(self, ctx, rng):
        self.deployed = select_validation(ctx, self.arms, self.deployed)
        return self.deployed

    def extra_state(self):
        return {"deployed": self.deployed}


class ABTestPolicy(Policy):
    """Incumbent serves while a newly trained challenger is scored offline on the same batches."""

    name = "ab_test"

    def __init__(self, spec):
        super().__init__(spec)
        self.deployed: ModelId | None = None
        self.pending: ModelId | None = None
        self.test: AbTestState | None = None
        self.history: dict[ModelId, list[float]] = {}

    def add_model(self, model, validation_score):
        super().add_model(model, validation_score)
        self.history[model] = []
        if self.deployed is None:
            self.deployed = model
        else:
            self.pending = model

    def _start_test(self, challenger: ModelId, batch_len: int) -> AbTestState:
        window = self.history[self.deployed][-self.spec.sigma_window:]
        sp = self.spec
        if len(window) < 2:
            # no spread estimate yet: decide on the first shared batch
            sigma, required = SIGMA_FLOOR, 1
        else:
            sigma = max(float(np.std(window, ddof=1)), SIGMA_FLOOR)
            level = float(np.mean(window))
            effect = sp.delta * level if level > 0 else sp.delta
            # sigma is a per-batch spread, so this count is in batches
            required = required_sample_size(sp.alpha, sp.power, sigma, effect) * batch_len
        return AbTestState(
            incumbent=self.deployed, challenger=challenger, required_n=required,
            delta=sp.delta, alpha=sp.alpha, power=sp.power, sigma_estimate=sigma,
        )

    def select(self, ctx, rng):
        if self.pending is not None:
            if self.test is not None:
                self.deployed = ab_conclude(self.test)
            self.test = self._start_test(self.pending, ctx.batch_len)
            self.pending = None
        return self.deployed

    def observe(self, ctx, model, metric, reward, evaluate=None):
        super().observe(ctx, model, metric, reward, evaluate)
        if self.test is None:
            self.history[model].append(metric)
            return
        inc, ch = self.test.incumbent, self.test.challenger
        s_inc = metric if model == inc else (evaluate(inc) if evaluate else None)
        s_ch = evaluate(ch) if evaluate else None
        if s_inc is None or s_ch is None:
            return
        self.history[inc].append(s_inc)
        self.history[ch].append(s_ch)
        self.test, winner = ab_step(self.test, s_inc, s_ch, ctx.batch_len)
        if winner is not None:
            self.deployed = winner
            self.test = None

    def extra_state(self):
        return {"deployed": self.deployed, "test": asdict(self.test) if self.test else None}


class EpsilonGreedyPolicy(Policy):
    name = "epsilon_greedy"

    def current_epsilon(self, ctx: PolicyContext) -> float:
        return epsilon_decay(self.spec.epsilon, self.spec.epsilon_decay, ctx.global_batch_counter - 1)

    def select(self, ctx, rng):
        return select_epsilon_greedy(ctx, self.arms, self.current_epsilon(ctx), rng)


class UCBPolicy(Policy):
    name = "ucb"

    def select(self, ctx, rng):
        return select_ucb(ctx, self.arms, self.spec.c)


class ThompsonPolicy(Policy):
    name = "thompson"

    def select(self, ctx, rng):
        return thompson_sample({m: self.arms[m].posterior for m in ctx.available_models}, rng)


POLICIES: dict[str, type[Policy]] = {
    cls.name: cls
    for cls in (NaivePolicy, ValidationPolicy, ABTestPolicy, EpsilonGreedyPolicy, UCBPolicy, ThompsonPolicy)
}


def make_policy(spec: PolicySpec) -> Policy:
    try:
        return POLICIES[spec.name](spec)
    except KeyError:
        raise ValueError(f"unknown policy {spec.name!r}") from None
