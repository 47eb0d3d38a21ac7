"""Command-line interface.

Every command reads a scene (``--scene``) or builds a minimal one from flags,
writes its artifacts into ``--out`` (default ``$MULTIGRASP_OUT`` or
``./multigrasp_out``) and ends with a ``run.json`` record.  Failures print a
one-line JSON error on stderr and exit non-zero.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .audit import audit_solution
from .errors import GraspError, ValidationError
from .geometry import export_obj
from .kinematics import HandModel
from .planner import SequencePlan, plan_greedy, plan_sequential, run_campaign
from .reachability import (build_reachability_map, is_geometrically_permissive,
                           min_grasp_distance, write_capacity_csv, write_collision_csv)
from .report import dumps, export_scene, format_solution, load_solution, save_solution
from .scene import SceneDocument, SceneSettings, catalog_scene, load_scene, scene_from_dict
from .synthesis import synthesize_grasp

ENV_OUT = "MULTIGRASP_OUT"
DEFAULT_OUT = "multigrasp_out"


class CliError(Exception):
    def __init__(self, kind, message, code=2, **extra):
        super().__init__(message)
        self.kind, self.code, self.extra = kind, code, extra


# --- setup ----------------------------------------------------------------------

def _scene(args) -> SceneDocument:
    if args.scene:
        scene = load_scene(args.scene)
    else:
        scene = scene_from_dict({"hand": args.hand or "human", "objects": []})
    s = scene.settings
    over = {k: getattr(args, k) for k in ("mode", "batch", "trials", "seed", "grid", "restarts")
            if getattr(args, k, None) is not None}
    for k, v in over.items():
        if k != "mode" and k != "seed" and v < 1:
            raise ValidationError(f"--{k}", "must be at least 1")
    scene.settings = replace(s, **over)
    if args.hand:
        scene.hand = args.hand
        scene = scene_from_dict(scene.to_dict())
    return scene


def _out(args) -> Path:
    out = Path(args.out or os.environ.get(ENV_OUT) or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(s: SceneSettings) -> int:
    return 0 if s.seed is None else s.seed


def _run_record(out: Path, command: str, scene: SceneDocument, artifacts, **body) -> None:
    doc = {"command": command, "scene": scene.to_dict(),
           "artifacts": sorted(str(Path(a).relative_to(out)) for a in artifacts), **body}
    (out / "run.json").write_text(dumps(doc))


def _link_pair(model: HandModel, pair):
    try:
        return tuple(sorted(model.link_id(x) for x in pair))
    except KeyError as e:
        raise ValidationError("candidates", f"unknown link {e}") from None


# --- commands -----------------------------------------------------------------------

def cmd_analyze(args) -> int:
    scene, out = _scene(args), _out(args)
    model = scene.hand_model()
    s = scene.settings
    objs = scene.object_models()
    if args.distance is not None:
        d = float(args.distance)
    elif objs:
        d = min_grasp_distance(objs[0], s.mu)
    else:
        raise ValidationError("--distance", "give a grasp distance or a scene with an object")
    if not d > 0:
        raise ValidationError("--distance", "must be positive")
    rmap = build_reachability_map(model, None, s.grid)
    arts = [write_capacity_csv(model, rmap.os_set, out / "capacity.csv", d),
            write_collision_csv(model, rmap.collision_map, out / "collision.csv"),
            _write_os_map(model, rmap.os_set, d, out / "os_map.csv")]
    hull_dir = out / "hulls"
    hull_dir.mkdir(exist_ok=True)
    for sp in rmap.spaces:
        arts.append(export_obj(sp.hull, hull_dir / f"reach_{model.links[sp.link].name}.obj",
                               model.links[sp.link].name))
    permissive = [os for os in rmap.os_set if is_geometrically_permissive(os, d)]
    _run_record(out, "analyze", scene, arts, distance=d, permissive=len(permissive),
                opposition_spaces=len(rmap.os_set), collision_pairs=len(rmap.collision_map.entries))
    print(f"{len(permissive)} of {len(rmap.os_set)} opposition spaces permissive at d={d!r} mm")
    return 0


def _write_os_map(model: HandModel, os_set, d: float, path: Path) -> Path:
    """Upper-triangular link-by-link table of cap_max for permissive pairs."""
    names = [lk.name for lk in model.links]
    cell = {os.links: os.cap_max for os in os_set if is_geometrically_permissive(os, d)}
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["link"] + names)
        for i, a in enumerate(names):
            w.writerow([a] + [repr(cell[(i, j)]) if j > i and (i, j) in cell else ""
                              for j in range(len(names))])
    return path


def cmd_grasp(args) -> int:
    scene, out = _scene(args), _out(args)
    model = scene.hand_model()
    s = scene.settings
    objs = scene.object_models()
    if not objs:
        raise ValidationError("objects", "the scene has no object to grasp")
    if args.object:
        match = [o for o in objs if o.id == args.object]
        if not match:
            raise ValidationError("--object", f"no object {args.object!r} in the scene")
        obj = match[0]
    else:
        obj = objs[0]
    settings = s.grasp_settings()
    rmap = build_reachability_map(model, None, s.grid)
    if scene.candidates:
        keys = [_link_pair(model, c) for c in scene.candidates]
        cands = [rmap.opposition(*k) for k in keys]
    else:
        d = min_grasp_distance(obj, s.mu)
        cands = sorted((os for os in rmap.os_set if is_geometrically_permissive(os, d)),
                       key=lambda os: (os.cap_max, os.links))[:s.batch]
    free = set(range(model.n_joints))
    sol = synthesize_grasp(model, model.rest_configuration(), free, obj, cands, rmap,
                           settings=settings, seed=_seed(s))
    audit = audit_solution(model, sol, grid=s.grid)
    arts = [save_solution(model, sol, out / "solution.json"),
            out / "report.txt", out / "scene.obj"]
    (out / "report.txt").write_text(format_solution(model, sol) + _audit_text(audit))
    export_scene(model, sol.configuration, [sol.posed_object], out / "scene.obj")
    _run_record(out, "grasp", scene, arts, object=obj.id,
                candidates=[[model.links[k].name for k in os.links] for os in cands],
                os=[model.links[k].name for k in sol.os], objective=sol.objective,
                violation=sol.violation, audit_passed=audit.passed())
    print(format_solution(model, sol), end="")
    return 0


def _audit_text(a) -> str:
    lines = [f"audit max violation {a.max_violation!r}",
             f"audit closure witness {a.witness}", f"audit reachable {a.realizable}"]
    return "\n".join(lines) + "\n"


def _plan_files(model: HandModel, plan: SequencePlan, out: Path) -> tuple[list[Path], list[dict]]:
    arts, steps = [], []
    held = []
    cseq = 0.0
    rows = []
    for k, st in enumerate(plan.steps):
        entry = {"step": k + 1, "object": st.object_id, "success": st.success}
        row = {"step": k + 1, "object": st.object_id, "success": int(st.success), "os": "",
               "n_q": "", "eta": "", "kappa": "", "objective": "", "c_seq": "", "reason": st.reason}
        if st.success:
            sol = st.solution
            cseq += sol.cap_max
            held.append(sol.posed_object)
            stem = f"step{k + 1}_{st.object_id}"
            arts.append(save_solution(model, sol, out / f"{stem}.json"))
            arts.append(export_scene(model, sol.configuration, list(held), out / f"{stem}.obj"))
            names = [model.links[i].name for i in sol.os]
            entry.update(os=names, objective=sol.objective, kappa=sol.kappa, eta=sol.eta,
                         n_q=sol.n_q, solution=f"{stem}.json")
            row.update(os="-".join(names), n_q=sol.n_q, eta=repr(sol.eta), kappa=repr(sol.kappa),
                       objective=repr(sol.objective))
        else:
            entry["reason"] = st.reason
        row["c_seq"] = repr(cseq)
        rows.append(row)
        steps.append(entry)
    path = out / "steps.csv"
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, list(rows[0]) if rows else ["step"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    arts.append(path)
    return arts, steps


def _timing_log(path: Path, steps) -> Path:
    with path.open("w") as fh:
        fh.write("step\tobject\tanalysis_s\tsolve_s\n")
        for k, st in enumerate(steps):
            fh.write(f"{k + 1}\t{st.object_id}\t{st.analysis_time:.3f}\t{st.solve_time:.3f}\n")
    return path


def cmd_sequence(args) -> int:
    scene, out = _scene(args), _out(args)
    model = scene.hand_model()
    s = scene.settings
    objs = scene.object_models()
    if not objs:
        raise ValidationError("objects", "the scene has no objects")
    mode = "ke" if s.mode == "ke" else "regular"
    plan = plan_sequential(model, objs, None, mode, s.batch, s.grasp_settings(),
                           seed=_seed(s), grid=s.grid, max_batches=s.max_batches)
    arts, steps = _plan_files(model, plan, out)
    _timing_log(out / "timings.log", plan.steps)
    _run_record(out, "sequence", scene, arts, order=list(plan.order), n_grasped=plan.n_grasped,
                sequence_cost=plan.sequence_cost, steps=steps)
    print(f"grasped {plan.n_grasped} of {len(plan.order)}; sequence cost {plan.sequence_cost!r}")
    return 0


def cmd_greedy(args) -> int:
    scene, out = _scene(args), _out(args)
    model = scene.hand_model()
    s = scene.settings
    objs = scene.object_models()
    if not objs:
        raise ValidationError("objects", "the scene has no objects")
    mode = "ke" if s.mode == "ke" else "regular"
    best, plans = plan_greedy(model, objs, mode, s.batch, s.grasp_settings(),
                              seed=_seed(s), grid=s.grid, max_batches=s.max_batches)
    path = out / "orders.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "order", "n_grasped", "sequence_cost"])
        for i, p in enumerate(plans):
            w.writerow([i, " ".join(p.order), p.n_grasped, repr(p.sequence_cost)])
    arts, steps = _plan_files(model, best, out)
    arts.append(path)
    _run_record(out, "greedy", scene, arts, orders=len(plans), best_order=list(best.order),
                n_grasped=best.n_grasped, sequence_cost=best.sequence_cost, steps=steps)
    print(f"best order {' '.join(best.order)}: grasped {best.n_grasped}, "
          f"sequence cost {best.sequence_cost!r}")
    return 0


def cmd_campaign(args) -> int:
    scene, out = _scene(args), _out(args)
    s = scene.settings
    if s.seed is None:
        raise ValidationError("settings.seed", "a campaign needs a seed")
    model = scene.hand_model()
    pool = scene.object_models()
    if not pool:
        pool = catalog_scene(scene.hand).object_models()
    mode = "ke" if s.mode == "ke" else "regular"
    stats = run_campaign(model, pool, s.trials, mode, seed=s.seed, batch=s.batch,
                         per_trial=s.per_trial, settings=s.grasp_settings(), grid=s.grid)
    rows_path = out / f"campaign_{mode}.csv"
    with rows_path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, list(stats.rows[0]), lineterminator="\n")
        w.writeheader()
        for r in stats.rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    summary = [{k: v for k, v in r.items() if not k.endswith("_time")} for r in stats.summary()]
    sum_path = out / f"summary_{mode}.csv"
    with sum_path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, list(summary[0]), lineterminator="\n")
        w.writeheader()
        for r in summary:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    with (out / f"timings_{mode}.log").open("w") as fh:
        fh.write("trial\tstep\tanalysis_s\tsolve_s\n")
        for r in stats.timings:
            fh.write(f"{r['trial']}\t{r['step'] + 1}\t{r['analysis_time']:.3f}\t{r['solve_time']:.3f}\n")
    _run_record(out, "campaign", scene, [rows_path, sum_path], mode=mode, summary=summary)
    for r in summary:
        print(f"step {r['step']}: success {r['success_rate']:.3f} "
              f"n_q {r['n_q_mean']:.2f}+-{r['n_q_std']:.2f} eta {r['eta_mean']:.3f}+-{r['eta_std']:.3f}")
    return 0


def cmd_audit(args) -> int:
    failed = 0
    results = []
    for f in args.files:
        try:
            model, sol = load_solution(f)
        except (OSError, ValueError, KeyError, TypeError) as e:
            raise CliError("ParseError", f"cannot load solution {f}: {e}", path=str(f)) from None
        a = audit_solution(model, sol, grid=args.grid)
        bad = a.failures(args.tol)
        results.append({"file": str(f), "passed": not bad, "failed": bad,
                        "max_violation": a.max_violation, "violations": a.violations})
        status = "ok" if not bad else "FAILED " + ",".join(bad)
        print(f"{f}: {status} (max violation {a.max_violation:.3e})")
        failed += bool(bad)
    if args.json:
        print(json.dumps(results))
    return 1 if failed else 0


# --- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="multigrasp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, batch=True):
        sp.add_argument("--scene", help="scene YAML file")
        sp.add_argument("--hand", help="bundled hand name or hand YAML path")
        sp.add_argument("--mode", choices=["single", "ke"], help="objective: plain or efficiency-weighted")
        if batch:
            sp.add_argument("--batch", type=int, help="opposition-space candidates per grasp")
        sp.add_argument("--seed", type=int, help="base random seed")
        sp.add_argument("--grid", type=int, help="joint samples per axis for reachable spaces")
        sp.add_argument("--restarts", type=int, help="solver restarts per candidate")
        sp.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./{DEFAULT_OUT})")

    sp = sub.add_parser("analyze", help="reachability, opposition-space and self-collision maps")
    common(sp, batch=False)
    sp.add_argument("--distance", type=float, help="grasp distance in mm")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("grasp", help="best grasp of one object")
    common(sp)
    sp.add_argument("--object", help="object id (default: first in the scene)")
    sp.set_defaults(func=cmd_grasp)

    sp = sub.add_parser("sequence", help="grasp the scene objects in order")
    common(sp)
    sp.set_defaults(func=cmd_sequence)

    sp = sub.add_parser("greedy", help="try every grasp order and keep the best")
    common(sp)
    sp.set_defaults(func=cmd_greedy)

    sp = sub.add_parser("campaign", help="repeated sequential grasping of random object draws")
    common(sp)
    sp.add_argument("--trials", type=int, help="number of trials")
    sp.set_defaults(func=cmd_campaign)

    sp = sub.add_parser("audit", help="recheck persisted solutions")
    sp.add_argument("files", nargs="+", help="solution JSON files")
    sp.add_argument("--tol", type=float, default=1e-6, help="violation tolerance")
    sp.add_argument("--grid", type=int, default=None, help="grid for the reachability recheck")
    sp.add_argument("--json", action="store_true", help="also print results as JSON")
    sp.add_argument("--seed", type=int, help="accepted for uniformity; the audit is deterministic")
    sp.set_defaults(func=cmd_audit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        _error(e.kind, str(e), **e.extra)
        return e.code
    except ValidationError as e:
        _error("ValidationError", str(e), path=e.path)
        return 2
    except GraspError as e:
        _error(type(e).__name__, str(e))
        return 1


def _error(kind, message, **extra) -> None:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
