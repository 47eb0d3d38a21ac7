"""Grasp a 10 mm sphere in five different ways and audit each grasp.

Run: python demos/03_single_grasp.py [restarts]
"""
import os
import sys
import time
from pathlib import Path

from multigrasp.audit import audit_solution
from multigrasp.kinematics import load_hand
from multigrasp.objects import sphere
from multigrasp.reachability import build_reachability_map
from multigrasp.report import export_scene, save_solution
from multigrasp.synthesis import GraspSettings, synthesize_grasp

restarts = int(sys.argv[1]) if len(sys.argv) > 1 else 4
out = Path(os.environ.get("MULTIGRASP_OUT", "demo_out")) / "single_grasp"
out.mkdir(parents=True, exist_ok=True)

hand = load_hand("human")
rmap = build_reachability_map(hand)
ball = sphere("ball", 10)
classes = {
    "finger-palm pinch": ("F3L4", "PALM"),
    "thumb-index pinch": ("F1L4", "F2L4"),
    "single-finger wrap": ("F2L2", "F2L4"),
    "non-adjacent adduction": ("F2L3", "F4L3"),
    "adjacent adduction": ("F3L4", "F4L4"),
}
free = set(range(hand.n_joints))
for label, (a, b) in classes.items():
    os_ = rmap.opposition(hand.link_id(a), hand.link_id(b))
    t = time.perf_counter()
    sol = synthesize_grasp(hand, hand.rest_configuration(), free, ball, [os_], rmap,
                           settings=GraspSettings(restarts=restarts), seed=0)
    dt = time.perf_counter() - t
    rep = audit_solution(hand, sol)
    print(f"{label:24s} {a}-{b}: objective {sol.objective:8.3f}  C_f {sol.costs['C_f']:.3f}  "
          f"eta {sol.eta:.2f}  audit {'ok' if rep.passed() else 'FAILED'} "
          f"({rep.max_violation:.1e})  {dt:.1f}s")
    stem = f"{a}-{b}"
    save_solution(hand, sol, out / f"{stem}.json")
    export_scene(hand, sol.configuration, [sol.posed_object], out / f"{stem}.obj")
print(f"solutions and meshes in {out}")
