"""Sequential, greedy and campaign planning over several objects.

A plan grasps objects one after another.  Each successful grasp pins the
joints it used, so later grasps work with the remaining kinematic redundancy
and must keep clear of every object already held.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from itertools import permutations

import numpy as np

from .errors import NoFeasibleGrasp, NoPermissiveOS, TooManyPermutations
from .kinematics import HandModel, active_joints
from .objects import ObjectModel
from .reachability import (DEFAULT_GRID, build_reachability_map, is_geometrically_permissive,
                           min_grasp_distance)
from .seeding import derive_rng, derive_seed
from .synthesis import GraspSettings, GraspSolution, synthesize_grasp

MAX_PERMUTED = 6
MODES = {"regular": "single", "single": "single", "ke": "ke"}


@dataclass(frozen=True)
class KEMetric:
    n_c: int
    n_q: int
    eta: float

    @property
    def kappa(self) -> float:
        return math.exp(self.n_c + self.n_q + self.eta)


def kinematic_efficiency(sol: GraspSolution) -> KEMetric:
    return KEMetric(2, sol.n_q, sol.eta)


@dataclass
class PlannerState:
    configuration: np.ndarray
    free: set[int]
    grasped: list[tuple[ObjectModel, GraspSolution]] = field(default_factory=list)
    used: set[tuple[int, int]] = field(default_factory=set)

    @property
    def held(self) -> tuple[ObjectModel, ...]:
        return tuple(o for o, _ in self.grasped)

    def pinned(self) -> dict[int, float]:
        return {j: float(self.configuration[j]) for j in range(len(self.configuration))
                if j not in self.free}

    def commit(self, sol: GraspSolution) -> None:
        self.configuration = np.array(sol.configuration)
        self.free -= set(sol.consumed)
        self.grasped.append((sol.posed_object, sol))
        self.used.add(tuple(sol.os))


@dataclass
class StepResult:
    object_id: str
    success: bool
    solution: GraspSolution | None = None
    reason: str = ""
    candidates: tuple[tuple[int, int], ...] = ()
    analysis_time: float = 0.0
    solve_time: float = 0.0

    @property
    def metric(self) -> KEMetric | None:
        return None if self.solution is None else kinematic_efficiency(self.solution)


@dataclass
class SequencePlan:
    order: tuple[str, ...]
    steps: list[StepResult]
    final_configuration: np.ndarray

    @property
    def n_grasped(self) -> int:
        return sum(s.success for s in self.steps)

    @property
    def sequence_cost(self) -> float:
        return float(sum(s.solution.cap_max for s in self.steps if s.success))

    @property
    def held(self) -> tuple[ObjectModel, ...]:
        return tuple(s.solution.posed_object for s in self.steps if s.success)


def _has_free_joint(model: HandModel, os, free) -> bool:
    return any(j in free for lk in os.links for j in active_joints(model, lk))


def candidate_pool(model: HandModel, rmap, obj: ObjectModel, state: PlannerState, mu: float):
    """Permissive opposition spaces still available to ``obj``, by capacity."""
    d = min_grasp_distance(obj, mu)
    pool = [os for os in rmap.os_set
            if os.links not in state.used and is_geometrically_permissive(os, d)
            and _has_free_joint(model, os, state.free)]
    if not pool:
        raise NoPermissiveOS(f"no permissive opposition space for {obj.id} at d={d:.4f} mm")
    pool.sort(key=lambda os: (os.cap_max, os.links))
    return pool


def plan_sequential(model: HandModel, objects, order=None, mode: str = "ke", batch: int = 3,
                    settings: GraspSettings | None = None, seed=0, grid: int = DEFAULT_GRID,
                    configuration=None, free=None, choose: str = "smallest",
                    select: str | None = None, pick_seed=None,
                    max_batches: int | None = None) -> SequencePlan:
    """Grasp ``objects`` one by one in ``order`` (indices or ids).

    Each step tries ``batch`` opposition spaces: the smallest capacities with
    ``choose="smallest"``, or a random sample of the permissive set with
    ``choose="random"`` (drawn from ``pick_seed``).  When a mini-batch yields
    no feasible grasp the next ``batch`` spaces of the pool are tried, up to
    ``max_batches`` mini-batches (``None``: the whole pool).  A step that
    exhausts them is skipped and planning moves on to the next object.
    """
    if batch < 1:
        raise ValueError("batch size must be at least 1")
    if max_batches is not None and max_batches < 1:
        raise ValueError("max_batches must be at least 1")
    if mode not in MODES:
        raise ValueError(f"unknown planning mode {mode!r}")
    objects = list(objects)
    by_id = {o.id: k for k, o in enumerate(objects)}
    order = list(range(len(objects))) if order is None else \
        [by_id[k] if isinstance(k, str) else int(k) for k in order]
    if sorted(order) != sorted(set(order)) or any(not 0 <= k < len(objects) for k in order):
        raise ValueError("order must list distinct object indices")
    settings = replace(settings or GraspSettings(), mode=MODES[mode])
    select = select or ("kappa" if settings.mode == "ke" and choose == "random" else "objective")
    q = model.rest_configuration() if configuration is None else np.array(configuration, dtype=float)
    state = PlannerState(q, set(range(model.n_joints)) if free is None else set(free))

    steps = []
    for step, k in enumerate(order):
        obj = objects[k]
        if not state.free:
            steps.append(StepResult(obj.id, False, reason="no free joints"))
            continue
        t0 = time.perf_counter()
        rmap = build_reachability_map(model, state.pinned(), grid)
        try:
            pool = candidate_pool(model, rmap, obj, state, settings.mu)
        except NoPermissiveOS as e:
            steps.append(StepResult(obj.id, False, reason=str(e),
                                    analysis_time=time.perf_counter() - t0))
            continue
        if choose == "random":
            rng = derive_rng(seed if pick_seed is None else pick_seed, "pick", step)
            pool = [pool[i] for i in rng.permutation(len(pool))]
        n_batches = math.ceil(len(pool) / batch)
        if max_batches is not None:
            n_batches = min(n_batches, max_batches)
        t1 = time.perf_counter()
        sol, tried = None, []
        for b in range(n_batches):
            cands = pool[b * batch:(b + 1) * batch]
            tried += cands
            key = ("step", step) if b == 0 else ("step", step, "batch", b)
            try:
                sol = synthesize_grasp(model, state.configuration, state.free, obj, cands, rmap,
                                       grasped=state.held, settings=settings,
                                       seed=derive_seed(seed, *key), select=select)
                break
            except NoFeasibleGrasp as e:
                reason = str(e)
        t2 = time.perf_counter()
        if sol is not None:
            state.commit(sol)
            reason = ""
        steps.append(StepResult(obj.id, sol is not None, sol, reason,
                                tuple(os.links for os in tried), t1 - t0, t2 - t1))
    return SequencePlan(tuple(objects[k].id for k in order), steps, state.configuration)


def plan_greedy(model: HandModel, objects, mode: str = "ke", batch: int = 3,
                settings: GraspSettings | None = None, seed=0, grid: int = DEFAULT_GRID,
                orders=None, max_batches: int | None = None
                ) -> tuple[SequencePlan, list[SequencePlan]]:
    """Try every grasp order and keep the best plan.

    Best means most objects grasped, then the lowest sequence cost, then the
    earliest order.  Returns ``(best, all plans)``.
    """
    objects = list(objects)
    if orders is None:
        if len(objects) > MAX_PERMUTED:
            raise TooManyPermutations(
                f"{len(objects)} objects give {math.factorial(len(objects))} orders; "
                f"supply an explicit subset of orders")
        orders = list(permutations(range(len(objects))))
    plans = [plan_sequential(model, objects, order, mode, batch, settings,
                             seed=derive_seed(seed, "order", i), grid=grid,
                             max_batches=max_batches)
             for i, order in enumerate(orders)]
    best = min(range(len(plans)), key=lambda i: (-plans[i].n_grasped, plans[i].sequence_cost, i))
    return plans[best], plans


# --- campaign -------------------------------------------------------------------

@dataclass
class CampaignStats:
    mode: str
    trials: int
    steps: int
    rows: list[dict]
    timings: list[dict]

    def _step_rows(self, s: int):
        return [r for r in self.rows if r["step"] == s]

    def success_rate(self, s: int) -> float:
        rows = self._step_rows(s)
        return sum(r["success"] for r in rows) / len(rows)

    def _values(self, s: int, key: str) -> np.ndarray:
        return np.array([r[key] for r in self._step_rows(s) if r["success"]], dtype=float)

    def mean_std(self, s: int, key: str) -> tuple[float, float]:
        v = self._values(s, key)
        if len(v) == 0:
            return math.nan, math.nan
        return float(v.mean()), float(v.std())

    def summary(self) -> list[dict]:
        out = []
        for s in range(self.steps):
            nq, nq_sd = self.mean_std(s, "n_q")
            eta, eta_sd = self.mean_std(s, "eta")
            t = [r for r in self.timings if r["step"] == s]
            out.append({"step": s + 1, "success_rate": self.success_rate(s),
                        "n_q_mean": nq, "n_q_std": nq_sd, "eta_mean": eta, "eta_std": eta_sd,
                        "analysis_time": float(np.mean([r["analysis_time"] for r in t])),
                        "solve_time": float(np.mean([r["solve_time"] for r in t]))})
        return out


def run_campaign(model: HandModel, pool, trials: int, mode: str = "ke", seed=0, batch: int = 3,
                 per_trial: int = 3, settings: GraspSettings | None = None,
                 grid: int = DEFAULT_GRID, progress=None) -> CampaignStats:
    """Repeated sequential grasping of random object draws.

    Regular mode grasps with one random permissive opposition space per step;
    KE mode tries ``batch`` random permissive ones with the efficiency-weighted
    objective and keeps the lowest kinematic-efficiency cost.  Both modes
    draw the same objects and the same candidate shuffles for a given seed,
    so the regular pick is always among the KE candidates.
    """
    if trials < 1:
        raise ValueError("a campaign needs at least one trial")
    if mode not in MODES:
        raise ValueError(f"unknown planning mode {mode!r}")
    pool = list(pool)
    if per_trial > len(pool):
        raise ValueError("object pool is smaller than the per-trial draw")
    ke = MODES[mode] == "ke"
    rows, timings = [], []
    for t in range(trials):
        draw = derive_rng(seed, "draw", t).choice(len(pool), per_trial, replace=False)
        objs = [pool[i] for i in draw]
        plan = plan_sequential(model, objs, None, mode, batch if ke else 1, settings,
                               seed=derive_seed(seed, "trial", t), grid=grid, choose="random",
                               pick_seed=derive_seed(seed, "pick", t), max_batches=1)
        cseq = 0.0
        for s, st in enumerate(plan.steps):
            sol = st.solution
            row = {"trial": t, "step": s, "object": st.object_id, "success": int(st.success),
                   "os": "", "n_q": "", "eta": "", "kappa": "", "objective": ""}
            if sol is not None:
                cseq += sol.cap_max
                names = [model.links[k].name for k in sol.os]
                row.update(os=f"{names[0]}-{names[1]}", n_q=sol.n_q, eta=sol.eta,
                           kappa=sol.kappa, objective=sol.objective)
            row["c_seq"] = cseq
            rows.append(row)
            timings.append({"trial": t, "step": s, "analysis_time": st.analysis_time,
                            "solve_time": st.solve_time})
        if progress is not None:
            progress(t, plan)
    return CampaignStats(mode, trials, per_trial, rows, timings)
