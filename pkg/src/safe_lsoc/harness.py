"""Closed-loop runners, metrics, and deterministic result export.

run_task drives every agent of a scenario with sampled controls filtered
through the barrier constraints; run_generalization mixes the controllers of
several solved tasks into a controller for a new target, reusing one rollout
batch per agent and step for all components.  Exported CSV files are
byte-deterministic for a given scenario and seed; wall-clock time lives only
in metrics.json.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .compose import (
    composite_control,
    composite_final_cost,
    composition_weights,
    state_weights,
)
from .lsoc import estimate_optimal_control, rollout_batch
from .mas import assemble_joint, build_subsystems, extract_local_control
from .scenarios import (
    UAV_DIM,
    UAV_INPUTS,
    Scenario,
    ScenarioError,
    obstacle_chain,
    subsystem_final_cost,
    subsystem_problem,
)
from .sde import (
    EXIT_INFEASIBLE,
    EXIT_MAX_TIME,
    EXIT_TARGET,
    KIND_ROLLOUT,
    KIND_SIM,
    NoiseStream,
    SafetyInfeasible,
    Trajectory,
    em_step,
    sample_increments,
)
from .zcbf import constraint_coeffs, lower_degree_terms, safety_filter

__all__ = [
    "AgentRecord",
    "RunResult",
    "SweepRow",
    "run_task",
    "run_generalization",
    "run_seeds",
    "margin_sweep",
    "compute_metrics",
    "write_trajectories_csv",
    "write_metrics_json",
    "write_sweep_csv",
    "export_run",
    "metrics_from_trajectory_csv",
]

MODE_BASELINE = "baseline"
MODE_FILTERED = "filtered"


@dataclass
class AgentRecord:
    """Everything recorded for one agent during a closed-loop run."""

    trajectory: Trajectory
    raw_controls: np.ndarray  # (T, P) pre-filter controls
    ess: np.ndarray  # (T,) effective sample size per control step
    h_values: np.ndarray  # (T+1, n_obstacles, levels) barrier chain values
    component_weights: np.ndarray | None = None  # (T, F) in composite runs


@dataclass
class RunResult:
    scenario: str
    mode: str
    seed: int
    agents: list[AgentRecord]
    task_targets: np.ndarray  # (n_agents, 2) targets the run steered toward
    infeasible_agent: int | None = None
    wall_time: float = 0.0

    @property
    def halted_infeasible(self) -> bool:
        return self.infeasible_agent is not None


def _thread_count() -> int:
    raw = os.environ.get("SAFE_LSOC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _agent_constraints(chains, x):
    cons = []
    for chain in chains:
        cons.append(constraint_coeffs(chain, x))
        cons.extend(lower_degree_terms(chain, x))
    return cons


class _LoopState:
    """Shared bookkeeping for the closed-loop runners."""

    def __init__(self, sc: Scenario, seed: int, task_targets: np.ndarray):
        self.sc = sc
        self.task_targets = np.asarray(task_targets, dtype=float)
        self.base = NoiseStream(seed)
        self.dyn = sc.agent_dynamics()
        self.subsystems = build_subsystems(sc.graph)
        self.chains = [obstacle_chain(ob, self.dyn) for ob in sc.obstacles]
        n = sc.n_agents
        self.x = [np.array(a.start, dtype=float) for a in sc.agents]
        self.sim_gens = [
            self.base.child(KIND_SIM, i, 0).generator() for i in range(n)
        ]
        self.finished: list[str | None] = [None] * n
        self.times = [[0.0] for _ in range(n)]
        self.states = [[self.x[i].copy()] for i in range(n)]
        self.raw_controls: list[list[np.ndarray]] = [[] for _ in range(n)]
        self.controls: list[list[np.ndarray]] = [[] for _ in range(n)]
        self.ess: list[list[float]] = [[] for _ in range(n)]
        self.h_values = [[self._h_at(self.x[i])] for i in range(n)]
        self.weights: list[list[np.ndarray]] = [[] for _ in range(n)]
        self.infeasible_agent: int | None = None
        for i in range(n):
            if self._reached(i):
                self.finished[i] = EXIT_TARGET

    def _h_at(self, x: np.ndarray) -> np.ndarray:
        if not self.chains:
            return np.zeros((0, 0))
        return np.stack([chain.values(x) for chain in self.chains])

    def _reached(self, i: int) -> bool:
        return (
            float(np.linalg.norm(self.x[i][:2] - self.task_targets[i]))
            <= self.sc.sim.target_radius
        )

    def _in_arena(self, i: int) -> bool:
        (xlo, xhi), (ylo, yhi) = self.sc.sim.domain
        px, py = self.x[i][0], self.x[i][1]
        return xlo < px < xhi and ylo < py < yhi

    def active_agents(self) -> list[int]:
        return [i for i, f in enumerate(self.finished) if f is None]

    def apply_controls(self, step: int, pending: dict[int, tuple]) -> None:
        dt = self.sc.sim.dt
        for i, (u_raw, u, ess, w) in pending.items():
            dw = sample_increments(self.sim_gens[i], UAV_INPUTS, dt)
            self.x[i] = em_step(self.dyn, self.x[i], u, dt, dw)
            self.times[i].append((step + 1) * dt)
            self.states[i].append(self.x[i].copy())
            self.raw_controls[i].append(np.asarray(u_raw, dtype=float))
            self.controls[i].append(np.asarray(u, dtype=float))
            self.ess[i].append(float(ess))
            self.h_values[i].append(self._h_at(self.x[i]))
            if w is not None:
                self.weights[i].append(np.asarray(w, dtype=float))
            if self._reached(i):
                self.finished[i] = EXIT_TARGET
            elif not self._in_arena(i):
                # Leaving the arena is a failed run; recorded as a timeout
                # since the exit-reason vocabulary is fixed.
                self.finished[i] = EXIT_MAX_TIME

    def mark_infeasible(self, agent: int) -> None:
        self.infeasible_agent = agent
        for i, f in enumerate(self.finished):
            if f is None:
                self.finished[i] = EXIT_INFEASIBLE

    def finalize(self, scenario_name: str, mode: str, seed: int) -> RunResult:
        records = []
        for i in range(self.sc.n_agents):
            reason = self.finished[i] or EXIT_MAX_TIME
            traj = Trajectory(
                times=np.asarray(self.times[i]),
                states=np.asarray(self.states[i]),
                controls=(
                    np.asarray(self.controls[i])
                    if self.controls[i]
                    else np.zeros((0, UAV_INPUTS))
                ),
                exit_reason=reason,
            )
            records.append(
                AgentRecord(
                    trajectory=traj,
                    raw_controls=(
                        np.asarray(self.raw_controls[i])
                        if self.raw_controls[i]
                        else np.zeros((0, UAV_INPUTS))
                    ),
                    ess=np.asarray(self.ess[i]),
                    h_values=np.asarray(self.h_values[i]),
                    component_weights=(
                        np.asarray(self.weights[i]) if self.weights[i] else None
                    ),
                )
            )
        return RunResult(
            scenario=scenario_name,
            mode=mode,
            seed=seed,
            agents=records,
            task_targets=self.task_targets,
            infeasible_agent=self.infeasible_agent,
        )


def run_task(
    sc: Scenario,
    seed: int,
    mode: str = MODE_FILTERED,
    scenario_name: str | None = None,
) -> RunResult:
    """Run every agent toward its own target under one noise seed.

    Controls come from per-agent sampled estimates over the agent's factorial
    subsystem; in filtered mode each control is projected onto the barrier
    constraints before being applied.
    """
    if sc.task.mode != "single":
        raise ScenarioError("run_task requires a scenario with task.mode single")
    _check_mode(mode)
    t0 = time.perf_counter()
    targets = np.stack([a.target for a in sc.agents])
    loop = _LoopState(sc, seed, targets)
    problems = [
        subsystem_problem(sc, sub, targets, sc.sim.target_radius)
        for sub in loop.subsystems
    ]
    lam = sc.pi.temperature
    dt = sc.sim.dt
    max_steps = int(round(sc.sim.max_time / dt))

    for step in range(max_steps):
        active = loop.active_agents()
        if not active:
            break
        pending: dict[int, tuple] = {}
        for i in active:
            sub = loop.subsystems[i]
            joint = assemble_joint(sub, loop.x)
            batch = rollout_batch(
                problems[i],
                joint,
                dt,
                sc.pi.horizon_steps,
                sc.pi.rollouts,
                loop.base.child(KIND_ROLLOUT, i, step),
            )
            est = estimate_optimal_control(batch, lam)
            u_raw = extract_local_control(est.control, sub, UAV_INPUTS)
            if mode == MODE_FILTERED:
                cons = _agent_constraints(loop.chains, loop.x[i])
                try:
                    u = safety_filter(u_raw, cons)
                except SafetyInfeasible:
                    loop.mark_infeasible(i)
                    break
            else:
                u = u_raw
            pending[i] = (u_raw, u, est.effective_sample_size, None)
        if loop.infeasible_agent is not None:
            break
        loop.apply_controls(step, pending)

    result = loop.finalize(scenario_name or sc.name, mode, seed)
    result.wall_time = time.perf_counter() - t0
    return result


def run_generalization(
    sc: Scenario,
    seed: int,
    mode: str = MODE_FILTERED,
    best_of: int = 1,
    scenario_name: str | None = None,
) -> RunResult:
    """Steer toward a new target by mixing the component-task controllers.

    Each agent draws one rollout batch per step; every component reuses that
    batch with its own terminal cost, so the per-component desirability
    estimates and controls share the same sampled paths.  Mixture weights
    combine the task-similarity kernel with the per-component desirability.
    best_of > 1 repeats the run with derived seeds and keeps the attempt
    with the smallest summed terminal error.
    """
    if sc.task.mode != "composite":
        raise ScenarioError(
            "run_generalization requires a scenario with task.mode composite"
        )
    _check_mode(mode)
    if best_of < 1:
        raise ValueError("best_of must be >= 1")
    if best_of == 1:
        return _run_generalization_once(sc, seed, mode, scenario_name)
    best: RunResult | None = None
    best_err = np.inf
    for attempt in range(best_of):
        attempt_seed = seed if attempt == 0 else seed + 1_000_003 * attempt
        res = _run_generalization_once(sc, attempt_seed, mode, scenario_name)
        err = sum(
            float(np.linalg.norm(rec.trajectory.states[-1][:2] - res.task_targets[i]))
            for i, rec in enumerate(res.agents)
        )
        if err < best_err:
            best, best_err = res, err
    assert best is not None
    return best


def _run_generalization_once(
    sc: Scenario, seed: int, mode: str, scenario_name: str | None
) -> RunResult:
    t0 = time.perf_counter()
    comps = sc.task.components
    new_targets = sc.task.new_targets
    loop = _LoopState(sc, seed, new_targets)
    lam = sc.pi.temperature
    dt = sc.sim.dt
    max_steps = int(round(sc.sim.max_time / dt))

    # Shared per-subsystem problem: running cost and exit set target the new
    # task; per-component terminal costs re-score the same batch.
    problems = []
    comp_final = []  # [agent][component] terminal-cost closure
    mix_weights = []  # [agent] task-similarity weights
    for sub in loop.subsystems:
        finals = [
            subsystem_final_cost(
                sc, sub, comp.targets, comp.final_c, comp.final_d, comp.final_alpha
            )
            for comp in comps
        ]
        comp_final.append(finals)
        comp_joint_targets = [
            _joint_target_state(comp.targets, sub.members) for comp in comps
        ]
        new_joint_target = _joint_target_state(new_targets, sub.members)
        kernel = _position_kernel(sub.size, sc.task.kernel_width)
        weights = composition_weights(comp_joint_targets, new_joint_target, kernel)
        mix_weights.append(weights)
        problem = subsystem_problem(sc, sub, new_targets, sc.sim.target_radius)
        problem = dataclasses.replace(
            problem, final_cost=composite_final_cost(finals, weights, lam)
        )
        problems.append(problem)

    for step in range(max_steps):
        active = loop.active_agents()
        if not active:
            break
        pending: dict[int, tuple] = {}
        for i in active:
            sub = loop.subsystems[i]
            joint = assemble_joint(sub, loop.x)
            batch = rollout_batch(
                problems[i],
                joint,
                dt,
                sc.pi.horizon_steps,
                sc.pi.rollouts,
                loop.base.child(KIND_ROLLOUT, i, step),
            )
            cons = (
                _agent_constraints(loop.chains, loop.x[i])
                if mode == MODE_FILTERED
                else []
            )
            u_components = []
            log_z = []
            ess_values = []
            try:
                for phi in comp_final[i]:
                    s_f = batch.running_costs + phi(batch.exit_states)
                    est = estimate_optimal_control(
                        dataclasses.replace(batch, path_costs=s_f), lam
                    )
                    u_f = extract_local_control(est.control, sub, UAV_INPUTS)
                    if mode == MODE_FILTERED:
                        u_f = safety_filter(u_f, cons)
                    u_components.append(u_f)
                    log_z.append(est.log_desirability)
                    ess_values.append(est.effective_sample_size)
                w = state_weights(mix_weights[i], np.asarray(log_z))
                u_raw = composite_control(w, u_components)
                u = safety_filter(u_raw, cons) if mode == MODE_FILTERED else u_raw
            except SafetyInfeasible:
                loop.mark_infeasible(i)
                break
            pending[i] = (u_raw, u, min(ess_values), w)
        if loop.infeasible_agent is not None:
            break
        loop.apply_controls(step, pending)

    result = loop.finalize(scenario_name or sc.name, mode, seed)
    result.wall_time = time.perf_counter() - t0
    return result


def _joint_target_state(targets: np.ndarray, members) -> np.ndarray:
    blocks = []
    for m in members:
        blocks.append(np.array([targets[m][0], targets[m][1], 0.0, 0.0]))
    return np.concatenate(blocks)


def _position_kernel(n_members: int, width: float) -> np.ndarray:
    """Diagonal similarity metric: positions weighted, v and phi inert."""
    diag = np.tile([width, width, 1e-8, 1e-8], n_members)
    return np.diag(diag)


def _check_mode(mode: str) -> None:
    if mode not in (MODE_BASELINE, MODE_FILTERED):
        raise ValueError(f"mode must be '{MODE_BASELINE}' or '{MODE_FILTERED}'")


def run_seeds(
    sc: Scenario,
    seeds: Sequence[int],
    mode: str = MODE_FILTERED,
    runner: Callable[..., RunResult] = run_task,
    **kwargs,
) -> list[RunResult]:
    """Run several seeds, in parallel when SAFE_LSOC_THREADS allows."""
    workers = min(_thread_count(), len(seeds)) or 1
    if workers == 1:
        return [runner(sc, s, mode=mode, **kwargs) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        futures = [ex.submit(runner, sc, s, mode=mode, **kwargs) for s in seeds]
        return [f.result() for f in futures]


# Metrics ---------------------------------------------------------------------


def compute_metrics(result: RunResult, sc: Scenario) -> dict:
    """Run summary; position-derived entries are recomputable from the CSV."""
    n_obs = len(sc.obstacles)
    terminal_errors = []
    reached = []
    steps = []
    for i, rec in enumerate(result.agents):
        final_pos = rec.trajectory.states[-1][:2]
        terminal_errors.append(
            float(np.linalg.norm(final_pos - result.task_targets[i]))
        )
        reached.append(rec.trajectory.exit_reason == EXIT_TARGET)
        steps.append(len(rec.trajectory.controls))

    min_center_distance = []
    for j in range(n_obs):
        center = np.asarray(sc.obstacles[j].center)
        dmin = np.inf
        for rec in result.agents:
            d = np.linalg.norm(rec.trajectory.states[:, :2] - center, axis=1)
            dmin = min(dmin, float(d.min()))
        min_center_distance.append(dmin)

    violations = 0
    for rec in result.agents:
        if rec.h_values.size:
            violations += int(np.sum(np.any(rec.h_values[:, :, 0] < 0.0, axis=1)))

    activations = 0
    for rec in result.agents:
        if rec.raw_controls.size:
            diff = np.max(
                np.abs(rec.raw_controls - rec.trajectory.controls), axis=1
            )
            activations += int(np.sum(diff > 1e-12))

    pair_distances = {}
    for (i, j) in sc.costs.coop_pairs:
        pair_distances[f"{i}-{j}"] = _pair_mean_distance(result, i, j)

    metrics = {
        "scenario": result.scenario,
        "mode": result.mode,
        "seed": result.seed,
        "exit_reasons": [r.trajectory.exit_reason for r in result.agents],
        "reached": reached,
        "steps": steps,
        "terminal_position_error": terminal_errors,
        "min_center_distance": min_center_distance,
        "safety_violation_count": violations,
        "filter_activation_count": activations,
        "pair_mean_distance": pair_distances,
        "pair_initial_distance": {
            f"{i}-{j}": float(
                np.linalg.norm(sc.agents[i].start[:2] - sc.agents[j].start[:2])
            )
            for (i, j) in sc.costs.coop_pairs
        },
        "mean_ess": [
            float(r.ess.mean()) if r.ess.size else 0.0 for r in result.agents
        ],
        "min_ess": [
            float(r.ess.min()) if r.ess.size else 0.0 for r in result.agents
        ],
        "infeasible_agent": result.infeasible_agent,
        "wall_time_s": result.wall_time,
    }
    return metrics


def _pair_mean_distance(result: RunResult, i: int, j: int) -> float:
    """Mean distance over the run; a finished agent holds its last state."""
    si = result.agents[i].trajectory.states[:, :2]
    sj = result.agents[j].trajectory.states[:, :2]
    t_max = max(len(si), len(sj))
    xi = np.vstack([si, np.repeat(si[-1:], t_max - len(si), axis=0)])
    xj = np.vstack([sj, np.repeat(sj[-1:], t_max - len(sj), axis=0)])
    return float(np.linalg.norm(xi - xj, axis=1).mean())


# Export ----------------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def trajectory_header(n_obstacles: int, n_levels: int = 2) -> list[str]:
    cols = ["t", "agent", "x", "y", "v", "phi", "u1", "u2"]
    for j in range(n_obstacles):
        for lvl in range(n_levels):
            cols.append(f"h{lvl}_obs{j}")
    return cols


def write_trajectories_csv(result: RunResult, path: str | Path) -> Path:
    """Byte-deterministic trajectory table, time-major then agent order."""
    path = Path(path)
    n_obs = result.agents[0].h_values.shape[1] if result.agents else 0
    n_lvl = result.agents[0].h_values.shape[2] if n_obs else 2
    header = trajectory_header(n_obs, n_lvl)
    t_max = max((len(rec.trajectory.times) for rec in result.agents), default=0)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for t_idx in range(t_max):
            for agent, rec in enumerate(result.agents):
                traj = rec.trajectory
                if t_idx >= len(traj.times):
                    continue
                row = [_fmt(traj.times[t_idx]), str(agent)]
                row.extend(_fmt(v) for v in traj.states[t_idx])
                if t_idx < len(traj.controls):
                    row.extend(_fmt(v) for v in traj.controls[t_idx])
                else:
                    row.extend(["", ""])
                if n_obs:
                    row.extend(_fmt(v) for v in rec.h_values[t_idx].ravel())
                writer.writerow(row)
    return path


def write_metrics_json(metrics: dict, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    return path


def export_run(result: RunResult, sc: Scenario, out_dir: str | Path) -> dict:
    """Write trajectories.csv and metrics.json under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{result.scenario}_{result.mode}_seed{result.seed}"
    write_trajectories_csv(result, out / f"{stem}_trajectories.csv")
    metrics = compute_metrics(result, sc)
    write_metrics_json(metrics, out / f"{stem}_metrics.json")
    return metrics


def metrics_from_trajectory_csv(path: str | Path, sc: Scenario) -> dict:
    """Recompute the position-derived metrics straight from the CSV."""
    rows_by_agent: dict[int, list[dict]] = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            rows_by_agent.setdefault(int(row["agent"]), []).append(row)
    n_obs = len(sc.obstacles)
    terminal_errors = []
    min_center = [np.inf] * n_obs
    violations = 0
    # Single-task targets; composite CSVs are checked against new targets.
    if sc.task.mode == "single":
        targets = [a.target for a in sc.agents]
    else:
        targets = list(sc.task.new_targets)
    for agent in sorted(rows_by_agent):
        rows = rows_by_agent[agent]
        pos = np.array([[float(r["x"]), float(r["y"])] for r in rows])
        terminal_errors.append(
            float(np.linalg.norm(pos[-1] - np.asarray(targets[agent])))
        )
        for j in range(n_obs):
            center = np.asarray(sc.obstacles[j].center)
            min_center[j] = min(
                min_center[j],
                float(np.linalg.norm(pos - center, axis=1).min(initial=np.inf)),
            )
        if n_obs:
            h0 = np.array(
                [[float(r[f"h0_obs{j}"]) for j in range(n_obs)] for r in rows]
            )
            violations += int(np.sum(np.any(h0 < 0.0, axis=1)))
    return {
        "terminal_position_error": terminal_errors,
        "min_center_distance": [float(v) for v in min_center],
        "safety_violation_count": violations,
    }


# Margin sweep ----------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    margin: float
    seed: int
    mode: str
    obstacle: int
    min_center_distance: float
    threshold: float

    @property
    def cleared(self) -> bool:
        return self.min_center_distance >= self.threshold - 0.1


def margin_sweep(
    sc: Scenario,
    margins: Sequence[float],
    seeds: Sequence[int] | None = None,
    modes: Sequence[str] = (MODE_BASELINE, MODE_FILTERED),
) -> list[SweepRow]:
    """Re-run the scenario at each commanded margin, both control modes."""
    if sc.task.mode != "single":
        raise ScenarioError("margin sweep requires a single-task scenario")
    seeds = list(seeds if seeds is not None else sc.sim.seeds)
    rows = []
    for margin in margins:
        obstacles = tuple(
            dataclasses.replace(ob, margin=float(margin)) for ob in sc.obstacles
        )
        sc_m = dataclasses.replace(sc, obstacles=obstacles)
        from .scenarios import _validate_physics

        _validate_physics(sc_m)
        for mode in modes:
            for res in run_seeds(sc_m, seeds, mode=mode):
                metrics = compute_metrics(res, sc_m)
                for j, ob in enumerate(sc_m.obstacles):
                    rows.append(
                        SweepRow(
                            margin=float(margin),
                            seed=res.seed,
                            mode=mode,
                            obstacle=j,
                            min_center_distance=metrics["min_center_distance"][j],
                            threshold=ob.radius + float(margin),
                        )
                    )
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["margin", "seed", "mode", "obstacle",
             "min_center_distance", "threshold", "cleared"]
        )
        for row in rows:
            writer.writerow(
                [
                    _fmt(row.margin),
                    str(row.seed),
                    row.mode,
                    str(row.obstacle),
                    _fmt(row.min_center_distance),
                    _fmt(row.threshold),
                    str(int(row.cleared)),
                ]
            )
    return path
