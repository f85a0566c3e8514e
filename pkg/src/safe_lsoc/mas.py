"""Factorial subsystem decomposition over an undirected agent graph.

Each agent i solves a joint problem over itself plus its neighbors
(members = [i] + sorted neighbors, agent i in block 0) and keeps only its own
block of the resulting joint control. Dynamics stack block-diagonally because
the agents are physically decoupled; coupling enters through the running cost.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .sde import ControlAffineDynamics

__all__ = [
    "AgentGraph",
    "FactorialSubsystem",
    "build_subsystems",
    "assemble_joint",
    "joint_dynamics",
    "extract_local_control",
]


@dataclass(frozen=True)
class AgentGraph:
    """Undirected communication graph on agents 0..n_agents-1."""

    n_agents: int
    edges: frozenset[frozenset[int]]

    @classmethod
    def from_edge_list(
        cls, n_agents: int, edges: Sequence[Sequence[int]]
    ) -> "AgentGraph":
        if n_agents <= 0:
            raise ValueError("n_agents must be positive")
        norm = set()
        for e in edges:
            if len(e) != 2:
                raise ValueError(f"edge {e!r} must have exactly two endpoints")
            i, j = int(e[0]), int(e[1])
            if i == j:
                raise ValueError(f"self-loop on agent {i}")
            for k in (i, j):
                if not 0 <= k < n_agents:
                    raise ValueError(f"agent id {k} out of range [0, {n_agents})")
            norm.add(frozenset((i, j)))
        return cls(n_agents=n_agents, edges=frozenset(norm))

    def neighbors(self, i: int) -> list[int]:
        return sorted(j for e in self.edges if i in e for j in e if j != i)

    def edge_list(self) -> list[tuple[int, int]]:
        return sorted(tuple(sorted(e)) for e in self.edges)


@dataclass(frozen=True)
class FactorialSubsystem:
    """Joint block owned by one agent: itself (block 0) plus its neighbors."""

    central: int
    members: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.members[0] != self.central:
            raise ValueError("central agent must occupy block 0")
        if len(set(self.members)) != len(self.members):
            raise ValueError("duplicate member ids")

    @property
    def size(self) -> int:
        return len(self.members)

    def block(self, agent: int) -> int:
        return self.members.index(agent)


def build_subsystems(graph: AgentGraph) -> list[FactorialSubsystem]:
    """One subsystem per agent, ordered by agent id; neighbors ascending."""
    return [
        FactorialSubsystem(central=i, members=(i, *graph.neighbors(i)))
        for i in range(graph.n_agents)
    ]


def assemble_joint(
    sub: FactorialSubsystem,
    states: Mapping[int, np.ndarray] | Sequence[np.ndarray],
) -> np.ndarray:
    """Concatenate member states in block order."""
    parts = []
    for agent in sub.members:
        try:
            s = states[agent]
        except (KeyError, IndexError) as exc:
            raise ValueError(f"missing state for agent {agent}") from exc
        parts.append(np.asarray(s, dtype=float))
    return np.concatenate(parts)


def joint_dynamics(
    sub: FactorialSubsystem,
    agent_dynamics: Mapping[int, ControlAffineDynamics] | Sequence[ControlAffineDynamics],
) -> ControlAffineDynamics:
    """Stack member dynamics block-diagonally in block order.

    Assumes constant control matrices (true for every system shipped here);
    member drift closures must be vectorized over leading axes.
    """
    dyns = [agent_dynamics[a] for a in sub.members]
    state_dims = [d.state_dim for d in dyns]
    input_dims = [d.input_dim for d in dyns]
    m_total, p_total = sum(state_dims), sum(input_dims)
    x_offsets = np.concatenate(([0], np.cumsum(state_dims)))

    b_joint = scipy.linalg.block_diag(
        *[np.asarray(d.control_matrix(np.zeros(d.state_dim)), dtype=float) for d in dyns]
    )
    sigma_joint = scipy.linalg.block_diag(*[d.noise_cov for d in dyns])

    def drift(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        parts = [
            dyns[k].drift(x[..., x_offsets[k]:x_offsets[k + 1]])
            for k in range(len(dyns))
        ]
        return np.concatenate(parts, axis=-1)

    def control_matrix(x: np.ndarray) -> np.ndarray:
        return b_joint

    return ControlAffineDynamics(
        state_dim=m_total,
        input_dim=p_total,
        drift=drift,
        control_matrix=control_matrix,
        noise_cov=sigma_joint,
    )


def extract_local_control(
    joint_u: np.ndarray, sub: FactorialSubsystem, input_dim: int
) -> np.ndarray:
    """Block-0 slice: the only block the central agent actually applies."""
    joint_u = np.asarray(joint_u, dtype=float)
    if joint_u.shape[-1] < input_dim:
        raise ValueError("joint control shorter than one block")
    return joint_u[..., :input_dim]
