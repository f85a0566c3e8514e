"""UAV model, cost definitions, and validated scenario files.

State per vehicle is (x, y, v, phi): planar position, forward speed, heading.
Controls are (acceleration, turn rate); noise enters the same two channels.
Scenario JSON files describe agents, their communication graph, obstacles,
cost and sampling parameters, and the task (plain or composite); loading
validates the schema strictly and rejects physically inconsistent setups.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .lsoc import (
    BallBoundary,
    BoxBoundary,
    FirstExitDomain,
    LsocProblem,
    UnionDomain,
)
from .mas import AgentGraph, FactorialSubsystem, build_subsystems, joint_dynamics
from .sde import ControlAffineDynamics, validate_lambda_condition
from .zcbf import BarrierFunction, ZcbfChain, build_chain, in_safe_set

__all__ = [
    "UavState",
    "Obstacle",
    "Scenario",
    "ScenarioError",
    "uav_drift",
    "uav_dynamics",
    "running_cost_single",
    "running_cost_coop",
    "final_cost",
    "load_scenario",
    "bundled_scenario_path",
    "list_bundled_scenarios",
]

UAV_DIM = 4
UAV_INPUTS = 2


@dataclass(frozen=True)
class UavState:
    """Convenience record for one vehicle state."""

    x: float
    y: float
    v: float
    phi: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.v, self.phi])

    @classmethod
    def from_array(cls, arr: Sequence[float]) -> "UavState":
        x, y, v, phi = (float(a) for a in arr)
        return cls(x, y, v, phi)

    def wrapped(self) -> "UavState":
        """Copy with phi folded into (-pi, pi] for display.

        The dynamics and all stored trajectories keep phi unwrapped; fold
        only when presenting a heading to a reader.
        """
        phi = -((-self.phi + np.pi) % (2.0 * np.pi) - np.pi)
        return UavState(self.x, self.y, self.v, phi)


def uav_drift(x: np.ndarray) -> np.ndarray:
    """Passive kinematics (v cos phi, v sin phi, 0, 0); vectorized."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    v, phi = x[..., 2], x[..., 3]
    out[..., 0] = v * np.cos(phi)
    out[..., 1] = v * np.sin(phi)
    return out


_UAV_B = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def uav_dynamics(sigma: float = 0.05, nu: float = 0.025) -> ControlAffineDynamics:
    """Single-vehicle dynamics; controls and noise act on (v, phi) only."""
    if sigma <= 0 or nu <= 0:
        raise ValueError("noise levels must be positive")
    return ControlAffineDynamics(
        state_dim=UAV_DIM,
        input_dim=UAV_INPUTS,
        drift=uav_drift,
        control_matrix=lambda x: _UAV_B,
        noise_cov=np.diag([sigma, nu]),
    )


@dataclass(frozen=True)
class Obstacle:
    """Disc keep-out region with a commanded safety margin and soft cost."""

    center: tuple[float, float]
    radius: float
    margin: float
    soft_cost: float = 160.0

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("obstacle radius must be positive")
        if self.margin < 0:
            raise ValueError("obstacle margin must be non-negative")
        if self.soft_cost < 0:
            raise ValueError("obstacle soft cost must be non-negative")

    @property
    def keepout_radius(self) -> float:
        return self.radius + self.margin

    def barrier(self, state_dim: int = UAV_DIM) -> BarrierFunction:
        return BarrierFunction.circle(
            self.center, self.radius, self.margin, state_dim=state_dim
        )

    def contains(self, pos: np.ndarray) -> np.ndarray:
        """Inside the physical disc (soft-cost region), margin excluded."""
        pos = np.asarray(pos, dtype=float)
        d = pos - np.asarray(self.center)
        return np.einsum("...i,...i->...", d, d) < self.radius**2


def _obstacle_penalty(
    pos: np.ndarray, obstacles: Sequence[Obstacle]
) -> np.ndarray:
    pen = np.zeros(np.asarray(pos).shape[:-1])
    for ob in obstacles:
        pen = pen + ob.soft_cost * ob.contains(pos)
    return pen


def running_cost_single(
    states: np.ndarray,
    target: np.ndarray,
    d_max: float,
    obstacles: Sequence[Obstacle] = (),
) -> np.ndarray:
    """q = clamp(||pos - target|| - d_max, 0) plus obstacle soft cost.

    d_max is the start-to-target distance, so q vanishes anywhere closer to
    the goal than the start and penalizes straying farther.
    """
    states = np.asarray(states, dtype=float)
    pos = states[..., :2]
    goal = np.linalg.norm(pos - np.asarray(target, dtype=float), axis=-1)
    q = np.maximum(goal - d_max, 0.0)
    return q + _obstacle_penalty(pos, obstacles)


def running_cost_coop(
    joint_states: np.ndarray,
    member_targets: np.ndarray,
    d_max: float,
    pair_blocks: Sequence[tuple[int, float]],
    goal_weight: float,
    pair_weight: float,
    obstacles: Sequence[Obstacle] = (),
) -> np.ndarray:
    """Joint running cost for one subsystem, central agent in block 0.

    q = clamp(gw (||p_0 - t_0|| - d_max)
              + pw sum_j (||p_0 - p_j|| - d_0j), 0) + obstacle penalty(p_0).
    pair_blocks lists (member block index, initial pair distance) for the
    cooperation partners of the central agent.
    """
    joint_states = np.asarray(joint_states, dtype=float)
    pos0 = joint_states[..., 0:2]
    target0 = np.asarray(member_targets, dtype=float)[0]
    q = goal_weight * (np.linalg.norm(pos0 - target0, axis=-1) - d_max)
    for block, d_pair in pair_blocks:
        pos_j = joint_states[..., UAV_DIM * block : UAV_DIM * block + 2]
        q = q + pair_weight * (
            np.linalg.norm(pos0 - pos_j, axis=-1) - d_pair
        )
    q = np.maximum(q, 0.0)
    return q + _obstacle_penalty(pos0, obstacles)


def final_cost(
    states: np.ndarray,
    target: np.ndarray,
    c: float = 0.0,
    d: float = 2.0,
    alpha: float = 0.0,
) -> np.ndarray:
    """phi = (d/2) (|x - tx| + |y - ty| + c) + alpha on the position pair."""
    states = np.asarray(states, dtype=float)
    target = np.asarray(target, dtype=float)
    l1 = np.sum(np.abs(states[..., :2] - target), axis=-1)
    return (d / 2.0) * (l1 + c) + alpha


class ScenarioError(ValueError):
    """Scenario file failed schema or physical validation."""


@dataclass(frozen=True)
class AgentSpec:
    start: np.ndarray
    target: np.ndarray


@dataclass(frozen=True)
class CostParams:
    goal_weight: float = 1.0
    pair_weight: float = 0.0
    coop_pairs: tuple[tuple[int, int], ...] = ()
    final_c: float = 0.0
    final_d: float = 2.0
    final_alpha: float = 0.0


@dataclass(frozen=True)
class PiParams:
    rollouts: int = 2000
    horizon_steps: int = 60
    temperature: float = 1.0
    sigma: float = 0.05
    nu: float = 0.025


@dataclass(frozen=True)
class SimParams:
    dt: float = 0.05
    max_time: float = 30.0
    seeds: tuple[int, ...] = (0,)
    target_radius: float = 1.0
    domain: tuple[tuple[float, float], tuple[float, float]] = ((-5.0, 45.0), (-5.0, 40.0))


@dataclass(frozen=True)
class ComponentSpec:
    task_id: str
    targets: np.ndarray  # (n_agents, 2)
    final_c: float
    final_d: float
    final_alpha: float


@dataclass(frozen=True)
class TaskSpec:
    mode: str  # "single" or "composite"
    components: tuple[ComponentSpec, ...] = ()
    new_targets: np.ndarray | None = None  # (n_agents, 2)
    kernel_width: float = 0.02


@dataclass(frozen=True)
class Scenario:
    """Fully validated scenario ready for the runners."""

    name: str
    agents: tuple[AgentSpec, ...]
    graph: AgentGraph
    obstacles: tuple[Obstacle, ...]
    costs: CostParams
    pi: PiParams
    sim: SimParams
    task: TaskSpec

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def agent_dynamics(self) -> ControlAffineDynamics:
        return uav_dynamics(self.pi.sigma, self.pi.nu)

    def control_weight(self) -> np.ndarray:
        """R derived from the lambda condition: R = lam (sigma sigma^T)^{-1}."""
        sigma = np.diag([self.pi.sigma, self.pi.nu])
        return self.pi.temperature * np.linalg.inv(sigma @ sigma.T)


def _require_keys(
    obj: dict, path: str, required: Sequence[str], optional: Sequence[str] = ()
) -> None:
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise ScenarioError(f"{path}: unknown keys {sorted(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ScenarioError(f"{path}: missing required keys {missing}")


def _as_floats(value, path: str, length: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (length,) or not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{path}: expected {length} finite numbers")
    return arr


def _positive(value, path: str) -> float:
    v = float(value)
    if not np.isfinite(v) or v <= 0:
        raise ScenarioError(f"{path}: must be a positive number")
    return v


def _parse_component(
    entry: dict, index: int, n_agents: int, defaults: CostParams
) -> ComponentSpec:
    path = f"task.components[{index}]"
    if not isinstance(entry, dict):
        raise ScenarioError(f"{path}: expected an object")
    _require_keys(entry, path, ["targets"], ["id", "final"])
    targets = _parse_targets(entry["targets"], f"{path}.targets", n_agents)
    c, d, alpha = defaults.final_c, defaults.final_d, defaults.final_alpha
    if "final" in entry:
        fin = entry["final"]
        _require_keys(fin, f"{path}.final", [], ["c", "d", "alpha"])
        c = float(fin.get("c", c))
        d = float(fin.get("d", d))
        alpha = float(fin.get("alpha", alpha))
        if d <= 0:
            raise ScenarioError(f"{path}.final.d: must be positive")
    return ComponentSpec(
        task_id=str(entry.get("id", f"component_{index}")),
        targets=targets,
        final_c=c,
        final_d=d,
        final_alpha=alpha,
    )


def _parse_targets(value, path: str, n_agents: int) -> np.ndarray:
    """Accept one [x, y] broadcast to all agents, or one pair per agent."""
    arr = np.asarray(value, dtype=float)
    if arr.shape == (2,):
        arr = np.tile(arr, (n_agents, 1))
    if arr.shape != (n_agents, 2) or not np.all(np.isfinite(arr)):
        raise ScenarioError(
            f"{path}: expected [x, y] or one [x, y] per agent ({n_agents})"
        )
    return arr


def load_scenario(path: str | Path, name: str | None = None) -> Scenario:
    """Parse and validate a scenario file; raise ScenarioError on any defect."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError("scenario document must be a JSON object")
    _require_keys(
        raw, "scenario", ["agents", "obstacles", "sim", "task"],
        ["edges", "costs", "pi"],
    )

    # Agents.
    if not isinstance(raw["agents"], list) or not raw["agents"]:
        raise ScenarioError("agents: expected a non-empty list")
    agents = []
    for i, entry in enumerate(raw["agents"]):
        apath = f"agents[{i}]"
        if not isinstance(entry, dict):
            raise ScenarioError(f"{apath}: expected an object")
        _require_keys(entry, apath, ["start", "target"])
        agents.append(
            AgentSpec(
                start=_as_floats(entry["start"], f"{apath}.start", UAV_DIM),
                target=_as_floats(entry["target"], f"{apath}.target", 2),
            )
        )
    n_agents = len(agents)

    try:
        graph = AgentGraph.from_edge_list(n_agents, raw.get("edges", []))
    except ValueError as exc:
        raise ScenarioError(f"edges: {exc}") from exc

    obstacles = []
    for j, entry in enumerate(raw["obstacles"]):
        opath = f"obstacles[{j}]"
        if not isinstance(entry, dict):
            raise ScenarioError(f"{opath}: expected an object")
        _require_keys(entry, opath, ["center", "radius", "margin"], ["soft_cost"])
        center = _as_floats(entry["center"], f"{opath}.center", 2)
        try:
            obstacles.append(
                Obstacle(
                    center=(center[0], center[1]),
                    radius=_positive(entry["radius"], f"{opath}.radius"),
                    margin=float(entry["margin"]),
                    soft_cost=float(entry.get("soft_cost", 160.0)),
                )
            )
        except ValueError as exc:
            raise ScenarioError(f"{opath}: {exc}") from exc

    costs_raw = raw.get("costs", {})
    _require_keys(
        costs_raw, "costs", [],
        ["goal_weight", "pair_weight", "coop_pairs", "final"],
    )
    fin = costs_raw.get("final", {})
    _require_keys(fin, "costs.final", [], ["c", "d", "alpha"])
    coop_pairs = []
    for k, pair in enumerate(costs_raw.get("coop_pairs", [])):
        ppath = f"costs.coop_pairs[{k}]"
        if len(pair) != 2:
            raise ScenarioError(f"{ppath}: expected [i, j]")
        i, j = int(pair[0]), int(pair[1])
        if frozenset((i, j)) not in graph.edges:
            raise ScenarioError(
                f"{ppath}: cooperation pair ({i}, {j}) is not a graph edge"
            )
        coop_pairs.append((min(i, j), max(i, j)))
    costs = CostParams(
        goal_weight=float(costs_raw.get("goal_weight", 1.0)),
        pair_weight=float(costs_raw.get("pair_weight", 0.0)),
        coop_pairs=tuple(sorted(set(coop_pairs))),
        final_c=float(fin.get("c", 0.0)),
        final_d=float(fin.get("d", 2.0)),
        final_alpha=float(fin.get("alpha", 0.0)),
    )
    if costs.final_d <= 0:
        raise ScenarioError("costs.final.d: must be positive")

    pi_raw = raw.get("pi", {})
    _require_keys(
        pi_raw, "pi", [],
        ["rollouts", "horizon_steps", "temperature", "sigma", "nu"],
    )
    pi = PiParams(
        rollouts=int(pi_raw.get("rollouts", 2000)),
        horizon_steps=int(pi_raw.get("horizon_steps", 60)),
        temperature=_positive(pi_raw.get("temperature", 1.0), "pi.temperature"),
        sigma=_positive(pi_raw.get("sigma", 0.05), "pi.sigma"),
        nu=_positive(pi_raw.get("nu", 0.025), "pi.nu"),
    )
    if pi.rollouts < 1 or pi.horizon_steps < 1:
        raise ScenarioError("pi.rollouts and pi.horizon_steps must be >= 1")

    sim_raw = raw["sim"]
    _require_keys(
        sim_raw, "sim", ["dt", "max_time", "seeds"],
        ["target_radius", "domain"],
    )
    seeds = sim_raw["seeds"]
    if (
        not isinstance(seeds, list)
        or not seeds
        or any((not isinstance(s, int)) or s < 0 for s in seeds)
    ):
        raise ScenarioError("sim.seeds: expected a non-empty list of ints >= 0")
    domain_raw = sim_raw.get("domain", [[-5.0, 45.0], [-5.0, 40.0]])
    try:
        (xlo, xhi), (ylo, yhi) = (
            (float(a), float(b)) for a, b in domain_raw
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioError("sim.domain: expected [[xlo, xhi], [ylo, yhi]]") from exc
    if xlo >= xhi or ylo >= yhi:
        raise ScenarioError("sim.domain: box must have positive extent")
    sim = SimParams(
        dt=_positive(sim_raw["dt"], "sim.dt"),
        max_time=_positive(sim_raw["max_time"], "sim.max_time"),
        seeds=tuple(int(s) for s in seeds),
        target_radius=_positive(sim_raw.get("target_radius", 1.0), "sim.target_radius"),
        domain=((xlo, xhi), (ylo, yhi)),
    )

    task_raw = raw["task"]
    _require_keys(
        task_raw, "task", ["mode"],
        ["components", "new_target", "kernel_width"],
    )
    mode = task_raw["mode"]
    if mode not in ("single", "composite"):
        raise ScenarioError(f"task.mode: expected 'single' or 'composite', got {mode!r}")
    if mode == "single":
        for key in ("components", "new_target"):
            if key in task_raw:
                raise ScenarioError(f"task.{key}: only valid in composite mode")
        task = TaskSpec(mode="single")
    else:
        if "components" not in task_raw or "new_target" not in task_raw:
            raise ScenarioError(
                "task: composite mode requires components and new_target"
            )
        comps = tuple(
            _parse_component(entry, f, n_agents, costs)
            for f, entry in enumerate(task_raw["components"])
        )
        if not comps:
            raise ScenarioError("task.components: need at least one component")
        new_targets = _parse_targets(
            task_raw["new_target"], "task.new_target", n_agents
        )
        task = TaskSpec(
            mode="composite",
            components=comps,
            new_targets=new_targets,
            kernel_width=_positive(
                task_raw.get("kernel_width", 0.02), "task.kernel_width"
            ),
        )

    scenario = Scenario(
        name=name or path.stem,
        agents=tuple(agents),
        graph=graph,
        obstacles=tuple(obstacles),
        costs=costs,
        pi=pi,
        sim=sim,
        task=task,
    )
    _validate_physics(scenario)
    return scenario


def _validate_physics(sc: Scenario) -> None:
    """Reject setups the solver cannot honestly run."""
    sigma = np.diag([sc.pi.sigma, sc.pi.nu])
    r_derived = sc.control_weight()
    if not validate_lambda_condition(r_derived, sigma, sc.pi.temperature):
        raise ScenarioError("noise covariance and control weight are inconsistent")

    (xlo, xhi), (ylo, yhi) = sc.sim.domain
    all_targets = [a.target for a in sc.agents]
    if sc.task.mode == "composite":
        all_targets.extend(t for comp in sc.task.components for t in comp.targets)
        all_targets.extend(sc.task.new_targets)
    for i, a in enumerate(sc.agents):
        px, py = a.start[0], a.start[1]
        if not (xlo < px < xhi and ylo < py < yhi):
            raise ScenarioError(f"agents[{i}].start: outside the domain box")
    for t in all_targets:
        if not (xlo < t[0] < xhi and ylo < t[1] < yhi):
            raise ScenarioError("target outside the domain box")
        for j, ob in enumerate(sc.obstacles):
            if np.linalg.norm(np.asarray(t) - np.asarray(ob.center)) <= ob.keepout_radius:
                raise ScenarioError(
                    f"target {tuple(t)} lies inside obstacle {j}'s keep-out disc"
                )

    dyn = sc.agent_dynamics()
    for j, ob in enumerate(sc.obstacles):
        chain = obstacle_chain(ob, dyn, [a.start for a in sc.agents])
        for i, a in enumerate(sc.agents):
            if not in_safe_set(chain, a.start):
                raise ScenarioError(
                    f"agents[{i}] starts outside the safe set of obstacle {j}"
                )


def obstacle_chain(
    obstacle: Obstacle,
    dyn: ControlAffineDynamics,
    sample_states: Sequence[np.ndarray] | None = None,
) -> ZcbfChain:
    """Barrier chain of one obstacle under the single-vehicle dynamics."""
    if sample_states is None:
        sample_states = _chain_probe_states(obstacle)
    return build_chain(
        obstacle.barrier(dyn.state_dim), dyn, np.atleast_2d(np.asarray(sample_states, dtype=float))
    )


def _chain_probe_states(obstacle: Obstacle) -> np.ndarray:
    """States with nonzero speed around the disc to expose control coupling."""
    cx, cy = obstacle.center
    r = obstacle.keepout_radius
    probes = []
    for ang in (0.0, 1.3, 2.7, 4.1):
        probes.append(
            [cx + (r + 2.0) * np.cos(ang), cy + (r + 2.0) * np.sin(ang), 1.5, ang]
        )
    return np.array(probes)


# Scenario -> solver plumbing ------------------------------------------------


def subsystem_domain(
    sc: Scenario,
    sub: FactorialSubsystem,
    target: np.ndarray,
    target_radius: float,
) -> FirstExitDomain:
    """Exit set for one subsystem: central target ball or arena box exit."""
    (xlo, xhi), (ylo, yhi) = sc.sim.domain
    return UnionDomain(
        parts=[
            BallBoundary(dims=(0, 1), center=np.asarray(target, dtype=float), radius=target_radius),
            BoxBoundary(dims=(0, 1), lower=np.array([xlo, ylo]), upper=np.array([xhi, yhi])),
        ]
    )


def subsystem_running_cost(
    sc: Scenario,
    sub: FactorialSubsystem,
    targets: np.ndarray,
):
    """Running-cost closure for one subsystem against the given agent targets.

    Agents in no cooperation pair weight their goal term at 1; cooperating
    agents use costs.goal_weight and costs.pair_weight on central-involving
    pairs. targets is the full (n_agents, 2) per-agent target array.
    """
    central = sub.central
    member_targets = np.asarray(targets, dtype=float)[list(sub.members)]
    d_max = float(np.linalg.norm(sc.agents[central].start[:2] - member_targets[0]))
    pair_blocks = []
    for (i, j) in sc.costs.coop_pairs:
        if central == i and j in sub.members:
            other = j
        elif central == j and i in sub.members:
            other = i
        else:
            continue
        d_pair = float(
            np.linalg.norm(sc.agents[central].start[:2] - sc.agents[other].start[:2])
        )
        pair_blocks.append((sub.block(other), d_pair))
    goal_weight = sc.costs.goal_weight if pair_blocks else 1.0
    obstacles = sc.obstacles

    def q(x: np.ndarray) -> np.ndarray:
        return running_cost_coop(
            x,
            member_targets,
            d_max,
            pair_blocks,
            goal_weight,
            sc.costs.pair_weight,
            obstacles,
        )

    return q


def subsystem_final_cost(
    sc: Scenario,
    sub: FactorialSubsystem,
    targets: np.ndarray,
    c: float | None = None,
    d: float | None = None,
    alpha: float | None = None,
):
    """Sum of per-member final costs against the given agent targets."""
    c = sc.costs.final_c if c is None else c
    d = sc.costs.final_d if d is None else d
    alpha = sc.costs.final_alpha if alpha is None else alpha
    member_targets = np.asarray(targets, dtype=float)[list(sub.members)]

    def phi(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape[:-1])
        for k in range(len(member_targets)):
            block = x[..., UAV_DIM * k : UAV_DIM * (k + 1)]
            total = total + final_cost(block, member_targets[k], c, d, alpha)
        return total

    return phi


def subsystem_problem(
    sc: Scenario,
    sub: FactorialSubsystem,
    targets: np.ndarray,
    target_radius: float,
    final_params: tuple[float, float, float] | None = None,
) -> LsocProblem:
    """First-exit problem one agent solves over its factorial subsystem."""
    dyn_single = sc.agent_dynamics()
    dyn = joint_dynamics(sub, {a: dyn_single for a in sub.members})
    targets = np.asarray(targets, dtype=float)
    c, d, alpha = final_params if final_params else (
        sc.costs.final_c, sc.costs.final_d, sc.costs.final_alpha
    )
    return LsocProblem(
        dynamics=dyn,
        running_cost=subsystem_running_cost(sc, sub, targets),
        final_cost=subsystem_final_cost(sc, sub, targets, c, d, alpha),
        domain=subsystem_domain(
            sc, sub, targets[sub.central], target_radius
        ),
        lam=sc.pi.temperature,
    )


def scenario_subsystems(sc: Scenario) -> list[FactorialSubsystem]:
    return build_subsystems(sc.graph)


def bundled_scenario_path(name: str) -> Path:
    """Path of a scenario shipped inside the package."""
    base = resources.files("safe_lsoc").joinpath("data")
    candidate = base.joinpath(f"{name}.json")
    if not candidate.is_file():
        raise ScenarioError(
            f"no bundled scenario {name!r}; available: {list_bundled_scenarios()}"
        )
    return Path(str(candidate))


def list_bundled_scenarios() -> list[str]:
    base = resources.files("safe_lsoc").joinpath("data")
    return sorted(p.name[:-5] for p in base.iterdir() if p.name.endswith(".json"))
