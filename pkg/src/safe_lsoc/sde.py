"""Control-affine SDE model, counter-based noise streams, Euler-Maruyama stepping.

Dynamics are dx = g(x) dt + B(x) (u dt + sigma dw) with dw ~ N(0, dt I).
All randomness flows through NoiseStream so that any (seed, stream_id) pair
reproduces the same draws regardless of execution order or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ControlAffineDynamics",
    "NoiseStream",
    "Trajectory",
    "SimulationError",
    "derive_stream_id",
    "KIND_SIM",
    "KIND_ROLLOUT",
    "sample_increments",
    "em_step",
    "simulate",
    "validate_lambda_condition",
]

EXIT_TARGET = "target_reached"
EXIT_MAX_TIME = "max_time"
EXIT_INFEASIBLE = "safety_infeasible"

# Stream-id field layout (64 bits total): purpose | agent | control step.
# Rollout indices address rows of a batch draw, not separate streams.
KIND_SIM = 1
KIND_ROLLOUT = 2
_KIND_BITS, _AGENT_BITS, _STEP_BITS = 4, 14, 46


def derive_stream_id(kind: int, agent: int = 0, step: int = 0) -> int:
    """Pack (kind, agent, step) into a single non-negative stream id."""
    if not 0 <= kind < 2**_KIND_BITS:
        raise ValueError(f"kind {kind} out of range")
    if not 0 <= agent < 2**_AGENT_BITS:
        raise ValueError(f"agent index {agent} out of range")
    if not 0 <= step < 2**_STEP_BITS:
        raise ValueError(f"step index {step} out of range")
    return (kind << (_AGENT_BITS + _STEP_BITS)) | (agent << _STEP_BITS) | step


class SimulationError(RuntimeError):
    """Non-finite state or control encountered; carries the partial trajectory."""

    def __init__(self, message: str, trajectory: "Trajectory | None" = None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass
class ControlAffineDynamics:
    """dx = drift(x) dt + control_matrix(x) (u dt + sigma dw).

    drift maps (..., M) -> (..., M) (vectorized over leading axes);
    control_matrix maps a state to (M, P), or to (..., M, P) when state
    dependent and called on a batch. noise_cov is the constant P x P sigma.
    """

    state_dim: int
    input_dim: int
    drift: Callable[[np.ndarray], np.ndarray]
    control_matrix: Callable[[np.ndarray], np.ndarray]
    noise_cov: np.ndarray

    def __post_init__(self) -> None:
        self.noise_cov = np.asarray(self.noise_cov, dtype=float)
        if self.noise_cov.shape != (self.input_dim, self.input_dim):
            raise ValueError(
                f"noise_cov must be ({self.input_dim}, {self.input_dim}), "
                f"got {self.noise_cov.shape}"
            )


@dataclass
class NoiseStream:
    """Deterministic Gaussian increment source keyed by (seed, stream_id).

    Two streams constructed with the same ids yield identical draw sequences;
    distinct stream_ids give statistically independent sequences.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator | None = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.stream_id < 0:
            raise ValueError("stream_id must be non-negative")

    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(
                entropy=self.seed, spawn_key=(self.stream_id,)
            )
            self._gen = np.random.Generator(np.random.Philox(ss))
        return self._gen

    def child(self, kind: int, agent: int = 0, step: int = 0) -> "NoiseStream":
        """Fresh stream for a sub-task; independent of draws made on self."""
        return NoiseStream(self.seed, derive_stream_id(kind, agent, step))


def sample_increments(
    stream: NoiseStream | np.random.Generator,
    dim: int,
    dt: float,
    count: int | None = None,
) -> np.ndarray:
    """Draw Brownian increments ~ N(0, dt I_dim).

    Returns shape (dim,) or (count, dim). Passing a NoiseStream advances it;
    dt = 0 is a degenerate case (returns zeros without consuming draws).
    """
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    shape = (dim,) if count is None else (count, dim)
    if dt == 0.0:
        return np.zeros(shape)
    gen = stream.generator() if isinstance(stream, NoiseStream) else stream
    return gen.normal(0.0, np.sqrt(dt), size=shape)


def em_step(
    dyn: ControlAffineDynamics,
    x: np.ndarray,
    u: np.ndarray,
    dt: float,
    dw: np.ndarray,
) -> np.ndarray:
    """One Euler-Maruyama step: x + g(x) dt + B(x) (u dt + sigma dw)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    dw = np.asarray(dw, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u)) and np.all(np.isfinite(dw))):
        raise SimulationError("non-finite input to em_step")
    b = np.asarray(dyn.control_matrix(x), dtype=float)
    return x + dyn.drift(x) * dt + b @ (u * dt + dyn.noise_cov @ dw)


@dataclass
class Trajectory:
    """Time-stamped states and applied controls from one simulated run.

    states has one more row than controls; exit_reason is one of
    target_reached / max_time / safety_infeasible.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    exit_reason: str

    def __post_init__(self) -> None:
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")
        if len(self.controls) != max(len(self.states) - 1, 0):
            raise ValueError("controls must be one shorter than states")


# Sentinel exception re-exported by zcbf; defined here so simulate() can halt
# on it without importing the filter module.
class SafetyInfeasible(RuntimeError):
    """No control satisfies the active barrier constraints."""

    def __init__(self, message: str, constraint_ids: Sequence[int] = ()):
        super().__init__(message)
        self.constraint_ids = tuple(constraint_ids)


def simulate(
    dyn: ControlAffineDynamics,
    policy: Callable[[np.ndarray, float], np.ndarray],
    x0: np.ndarray,
    dt: float,
    stop: Callable[[np.ndarray], bool],
    stream: NoiseStream,
    max_time: float,
) -> Trajectory:
    """Roll the closed loop forward until stop(x) fires or max_time elapses.

    The policy may raise SafetyInfeasible; the partial trajectory is then
    returned with exit_reason = safety_infeasible. Non-finite controls abort
    with SimulationError carrying the partial trajectory.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x0, dtype=float).copy()
    gen = stream.generator()
    times = [0.0]
    states = [x.copy()]
    controls: list[np.ndarray] = []
    n_steps = int(round(max_time / dt))
    reason = EXIT_MAX_TIME
    for k in range(n_steps):
        if stop(x):
            reason = EXIT_TARGET
            break
        t = k * dt
        try:
            u = np.asarray(policy(x, t), dtype=float)
        except SafetyInfeasible:
            reason = EXIT_INFEASIBLE
            break
        if not np.all(np.isfinite(u)):
            raise SimulationError(
                "policy returned non-finite control",
                Trajectory(np.array(times), np.array(states),
                           np.array(controls).reshape(len(controls), -1),
                           EXIT_MAX_TIME),
            )
        dw = sample_increments(gen, dyn.input_dim, dt)
        x = em_step(dyn, x, u, dt, dw)
        controls.append(u)
        times.append((k + 1) * dt)
        states.append(x.copy())
    else:
        if stop(x):
            reason = EXIT_TARGET
    n_u = len(controls)
    ctrl = np.array(controls) if n_u else np.zeros((0, dyn.input_dim))
    return Trajectory(np.array(times), np.array(states), ctrl, reason)


def validate_lambda_condition(
    R: np.ndarray,
    sigma: np.ndarray,
    lam: float,
    tol: float = 1e-9,
) -> bool:
    """Check sigma sigma^T = lambda R^{-1} entrywise within tol.

    This ties the control penalty to the noise covariance; the linear-form
    optimal control is valid only when it holds.
    """
    R = np.asarray(R, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError("R must be square")
    try:
        r_inv = np.linalg.inv(R)
    except np.linalg.LinAlgError as exc:
        raise ValueError("R must be invertible") from exc
    return bool(np.max(np.abs(sigma @ sigma.T - lam * r_inv)) <= tol)
