"""Path-integral estimation of the desirability function and its control.

The exponential transform Z = exp(-V/lambda) turns the HJB equation of a
control-affine problem with quadratic control cost into a linear PDE when the
noise covariance and control penalty are tied by sigma sigma^T = lambda R^{-1}.
Z(x) is then an expectation over passive dynamics (u = 0),

    Z(x) = E[ exp(-S/lambda) ],   S = phi(x_exit) + sum q(x_t) dt,

and the optimal control is read off the first-step noise of the same rollouts:

    u* = (sum_k w_k sigma dw0_k) / (dt sum_k w_k),   w_k = exp(-S_k/lambda).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .sde import (
    KIND_ROLLOUT,
    ControlAffineDynamics,
    NoiseStream,
    validate_lambda_condition,
)

__all__ = [
    "FirstExitDomain",
    "BoxBoundary",
    "BallBoundary",
    "UnionDomain",
    "LsocProblem",
    "RolloutBatch",
    "ControlEstimate",
    "DesirabilityUnderflow",
    "PiConfig",
    "PiPolicy",
    "rollout_batch",
    "estimate_desirability",
    "estimate_log_desirability",
    "estimate_optimal_control",
    "pi_policy",
]


class FirstExitDomain:
    """Interior/boundary classifier for the first-exit problem.

    boundary_mask must be vectorized over leading axes; clamp_exit may move a
    state that overshot the boundary back onto it (used to kill the Euler
    overshoot bias when comparing against grid solutions).
    """

    def boundary_mask(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def clamp_exit(self, x: np.ndarray) -> np.ndarray:
        return x


@dataclass
class BoxBoundary(FirstExitDomain):
    """Exit when any listed coordinate leaves [lower, upper]."""

    dims: tuple[int, ...]
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if not (len(self.dims) == len(self.lower) == len(self.upper)):
            raise ValueError("dims, lower, upper must have equal length")
        if np.any(self.lower >= self.upper):
            raise ValueError("box must have positive extent")

    def boundary_mask(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        sub = x[..., list(self.dims)]
        return np.any((sub <= self.lower) | (sub >= self.upper), axis=-1)

    def clamp_exit(self, x: np.ndarray) -> np.ndarray:
        x = np.array(x, dtype=float, copy=True)
        idx = list(self.dims)
        x[..., idx] = np.clip(x[..., idx], self.lower, self.upper)
        return x


@dataclass
class BallBoundary(FirstExitDomain):
    """Exit when the listed coordinates enter a closed ball (e.g. target set)."""

    dims: tuple[int, ...]
    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=float)
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def boundary_mask(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = x[..., list(self.dims)] - self.center
        return np.einsum("...i,...i->...", d, d) <= self.radius**2


@dataclass
class UnionDomain(FirstExitDomain):
    """Union of boundary sets; exit clamping applied by the part that fired."""

    parts: Sequence[FirstExitDomain]

    def boundary_mask(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        mask = np.zeros(x.shape[:-1], dtype=bool)
        for p in self.parts:
            mask |= p.boundary_mask(x)
        return mask

    def clamp_exit(self, x: np.ndarray) -> np.ndarray:
        x = np.array(x, dtype=float, copy=True)
        claimed = np.zeros(x.shape[:-1], dtype=bool)
        for p in self.parts:
            hit = p.boundary_mask(x) & ~claimed
            if np.any(hit):
                x[hit] = p.clamp_exit(x[hit])
                claimed |= hit
        return x


@dataclass
class LsocProblem:
    """First-exit stochastic control problem in linearly-solvable form.

    running_cost and final_cost must be vectorized over leading state axes.
    The control penalty R is derived from the noise so the lambda condition
    holds by construction; passing an explicit R re-validates it.
    """

    dynamics: ControlAffineDynamics
    running_cost: Callable[[np.ndarray], np.ndarray]
    final_cost: Callable[[np.ndarray], np.ndarray]
    domain: FirstExitDomain
    lam: float = 1.0
    control_weight: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        sigma = self.dynamics.noise_cov
        gram = sigma @ sigma.T
        if self.control_weight is None:
            self.control_weight = self.lam * np.linalg.inv(gram)
        else:
            self.control_weight = np.asarray(self.control_weight, dtype=float)
            if not validate_lambda_condition(self.control_weight, sigma, self.lam):
                raise ValueError(
                    "control_weight violates sigma sigma^T = lambda R^{-1}"
                )


@dataclass
class RolloutBatch:
    """K passive-dynamics rollouts from one start state.

    path_costs[k] = running_costs[k] + final_cost(exit_states[k]); dw0 holds
    the first-step Brownian increments used for control extraction. paths is
    populated only when requested (shape (H+1, K, M)).
    """

    x0: np.ndarray
    dt: float
    horizon: int
    noise_cov: np.ndarray
    dw0: np.ndarray
    exit_states: np.ndarray
    exit_steps: np.ndarray
    running_costs: np.ndarray
    path_costs: np.ndarray
    paths: np.ndarray | None = None

    @property
    def n_rollouts(self) -> int:
        return self.dw0.shape[0]


def rollout_batch(
    problem: LsocProblem,
    x0: np.ndarray,
    dt: float,
    horizon: int,
    n_rollouts: int,
    stream: NoiseStream,
    keep_paths: bool = False,
) -> RolloutBatch:
    """Integrate K passive rollouts, stopping each at its first boundary hit.

    Rollouts that never exit are evaluated at the horizon state. The whole
    batch is drawn from `stream` in one call, so the batch is a deterministic
    function of (seed, stream_id) regardless of execution order.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if horizon < 1:
        raise ValueError("horizon must be at least one step")
    if n_rollouts < 1:
        raise ValueError("need at least one rollout")
    x0 = np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise ValueError("start state must be finite")
    if bool(problem.domain.boundary_mask(x0)):
        raise ValueError("start state lies on the boundary")

    dyn = problem.dynamics
    m, p = dyn.state_dim, dyn.input_dim
    gen = stream.generator()
    dw = gen.normal(0.0, np.sqrt(dt), size=(horizon, n_rollouts, p))

    states = np.broadcast_to(x0, (n_rollouts, m)).copy()
    alive = np.ones(n_rollouts, dtype=bool)
    running = np.zeros(n_rollouts)
    exit_states = np.zeros((n_rollouts, m))
    exit_steps = np.full(n_rollouts, horizon, dtype=int)
    paths = np.empty((horizon + 1, n_rollouts, m)) if keep_paths else None
    if paths is not None:
        paths[0] = states

    sigma = dyn.noise_cov
    for t in range(horizon):
        q = np.asarray(problem.running_cost(states), dtype=float)
        running[alive] += q[alive] * dt
        b = np.asarray(dyn.control_matrix(states), dtype=float)
        noise = dw[t] @ sigma.T
        if b.ndim == 2:
            step = dyn.drift(states) * dt + noise @ b.T
        else:
            step = dyn.drift(states) * dt + np.einsum("kmp,kp->km", b, noise)
        new_states = np.where(alive[:, None], states + step, states)
        hit = problem.domain.boundary_mask(new_states) & alive
        if np.any(hit):
            exit_states[hit] = problem.domain.clamp_exit(new_states[hit])
            exit_steps[hit] = t + 1
            alive &= ~hit
        states = new_states
        if paths is not None:
            paths[t + 1] = states
        if not np.any(alive):
            # Remaining steps are no-ops once every path has exited.
            if paths is not None:
                paths[t + 2 :] = states
            break
    if np.any(alive):
        exit_states[alive] = states[alive]

    path_costs = running + np.asarray(problem.final_cost(exit_states), dtype=float)
    return RolloutBatch(
        x0=x0,
        dt=dt,
        horizon=horizon,
        noise_cov=sigma,
        dw0=dw[0],
        exit_states=exit_states,
        exit_steps=exit_steps,
        running_costs=running,
        path_costs=path_costs,
        paths=paths,
    )


class DesirabilityUnderflow(ValueError):
    """Every rollout weight exp(-S/lambda) underflowed to zero."""

    def __init__(self, max_log_weight: float):
        super().__init__(
            f"desirability underflow: max log weight {max_log_weight:.1f}"
        )
        self.max_log_weight = max_log_weight


def _log_weights(batch: RolloutBatch, lam: float) -> np.ndarray:
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return -batch.path_costs / lam


def estimate_log_desirability(batch: RolloutBatch, lam: float) -> float:
    """log Z = logsumexp(-S/lambda) - log K; immune to weight underflow."""
    lw = _log_weights(batch, lam)
    m = float(np.max(lw))
    return m + float(np.log(np.mean(np.exp(lw - m))))


def estimate_desirability(batch: RolloutBatch, lam: float) -> float:
    """Z = mean exp(-S/lambda), accumulated in the log domain."""
    lw = _log_weights(batch, lam)
    m = float(np.max(lw))
    if np.exp(m) == 0.0:
        raise DesirabilityUnderflow(m)
    return float(np.exp(m) * np.mean(np.exp(lw - m)))


@dataclass
class ControlEstimate:
    """Control extracted from a rollout batch plus sampling diagnostics."""

    control: np.ndarray
    effective_sample_size: float
    log_desirability: float

    @property
    def degenerate(self) -> bool:
        """True when the weights collapsed onto fewer than two rollouts."""
        return self.effective_sample_size < 2.0


def estimate_optimal_control(
    batch: RolloutBatch, lam: float, dt: float | None = None
) -> ControlEstimate:
    """u = sigma . (weighted mean of first-step noise) / dt.

    Weights are the normalized path weights softmax(-S/lambda); the reduction
    runs in rollout-index order so results are bitwise reproducible.
    """
    if dt is None:
        dt = batch.dt
    if dt <= 0:
        raise ValueError("dt must be positive")
    lw = _log_weights(batch, lam)
    m = float(np.max(lw))
    w = np.exp(lw - m)
    total = float(np.sum(w))
    prob = w / total
    ess = 1.0 / float(np.sum(prob**2))
    log_z = m + float(np.log(total / batch.n_rollouts))
    u = batch.noise_cov @ (prob @ batch.dw0) / dt
    return ControlEstimate(
        control=u,
        effective_sample_size=ess,
        log_desirability=log_z,
    )


@dataclass
class PiConfig:
    """Sampling configuration for the receding-horizon path-integral policy."""

    n_rollouts: int = 2000
    horizon_steps: int = 60
    keep_paths: bool = False


class PiPolicy:
    """Receding-horizon policy: fresh batch and control estimate every step.

    The stream for step k is derived from (agent, k), so two policies built
    with the same base stream produce identical batches at identical steps.
    The most recent batch and estimate stay accessible for reuse/diagnostics.
    """

    def __init__(
        self,
        problem: LsocProblem,
        config: PiConfig,
        dt: float,
        stream: NoiseStream,
        agent: int = 0,
    ):
        self.problem = problem
        self.config = config
        self.dt = dt
        self.base_stream = stream
        self.agent = agent
        self.last_batch: RolloutBatch | None = None
        self.last_estimate: ControlEstimate | None = None

    def step_index(self, t: float) -> int:
        return int(round(t / self.dt))

    def batch_at(self, x: np.ndarray, t: float) -> RolloutBatch:
        stream = self.base_stream.child(
            KIND_ROLLOUT, self.agent, self.step_index(t)
        )
        batch = rollout_batch(
            self.problem,
            x,
            self.dt,
            self.config.horizon_steps,
            self.config.n_rollouts,
            stream,
            keep_paths=self.config.keep_paths,
        )
        self.last_batch = batch
        return batch

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        batch = self.batch_at(x, t)
        est = estimate_optimal_control(batch, self.problem.lam)
        self.last_estimate = est
        return est.control


def pi_policy(
    problem: LsocProblem,
    config: PiConfig,
    dt: float,
    stream: NoiseStream,
    agent: int = 0,
) -> PiPolicy:
    """Convenience constructor mirroring the other module-level operations."""
    return PiPolicy(problem, config, dt, stream, agent)
