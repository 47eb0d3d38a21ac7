"""Reachable spaces, opposition spaces and the self-collision map of the human hand.

Run: python demos/01_hand_and_reachability.py
"""
import os
from pathlib import Path

import numpy as np

from multigrasp.kinematics import link_endpoints, load_hand
from multigrasp.reachability import (build_reachability_map, export_hulls,
                                     is_geometrically_permissive, min_grasp_distance)
from multigrasp.objects import sphere

out = Path(os.environ.get("MULTIGRASP_OUT", "demo_out")) / "reachability"

hand = load_hand("human")
print(f"{hand.name}: {hand.n_joints} joints, {hand.n_links} links")

# The rest pose is the fully open hand; flexion angles are negative.
q = hand.rest_configuration()
tip = link_endpoints(hand, q, "F3L4")[1]
print("middle fingertip at rest:", np.round(tip, 2))
q_curl = q.copy()
q_curl[list(hand.finger_chains["F3"][0][1:])] = np.deg2rad(-60)
print("middle fingertip curled: ", np.round(link_endpoints(hand, q_curl, "F3L4")[1], 2))

rmap = build_reachability_map(hand)
print("\nreachable-space volumes (mm^3):")
for name in ("F1L4", "F2L4", "F3L2", "F5L4"):
    s = rmap.space(hand.link_id(name))
    print(f"  {name}: {s.hull.volume:10.0f} from {s.sample_count} samples, "
          f"slack {s.slack:.2f} mm")

# A pair of links can clamp an object only if the contact distance fits its capacity.
ball = sphere("ball", 10)
d = min_grasp_distance(ball, mu=0.5)
permissive = [os_ for os_ in rmap.os_set if is_geometrically_permissive(os_, d)]
print(f"\nball r=10 needs d >= {d:.2f} mm; {len(permissive)} of {len(rmap.os_set)} pairs fit")
for os_ in sorted(permissive, key=lambda o: o.cap_max)[:5]:
    a, b = (hand.links[k].name for k in os_.links)
    print(f"  {a}-{b}: capacity [{os_.cap_min:.1f}, {os_.cap_max:.1f}] mm")

cmap = rmap.collision_map
print(f"\n{len(cmap.entries)} non-adjacent link pairs can collide; deepest:")
for (i, j), depth in sorted(cmap.entries.items(), key=lambda e: -e[1])[:3]:
    print(f"  {hand.links[i].name}-{hand.links[j].name}: {depth:.2f} mm")

paths = export_hulls(hand, rmap.spaces, out)
print(f"\nwrote {len(paths)} hull meshes to {out}")
