"""Grasp order matters: try every order, then compare planning modes on random draws.

Run: python demos/05_orders_and_campaign.py [trials]
"""
import sys

from multigrasp.kinematics import load_hand
from multigrasp.objects import load_catalog
from multigrasp.planner import plan_greedy, run_campaign
from multigrasp.synthesis import GraspSettings

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 4
hand = load_hand("human")
catalog = load_catalog()
fast = GraspSettings(restarts=1)

objects = [catalog[k] for k in ("O3", "O6", "O8")]
# at most four mini-batches per step keeps the six orders to a few minutes
best, plans = plan_greedy(hand, objects, mode="ke", batch=3, settings=fast, seed=0, max_batches=4)
for p in plans:
    print(f"  {' '.join(p.order)}: grasped {p.n_grasped}, cost {p.sequence_cost:.1f}")
print(f"best order {' '.join(best.order)}")

# Both modes see the same object draws and candidate shuffles for a seed.
pool = list(catalog.values())
for mode in ("regular", "ke"):
    stats = run_campaign(hand, pool, trials, mode, seed=0, settings=GraspSettings(restarts=2))
    for row in stats.summary():
        print(f"{mode:8s} step {row['step']}: success {row['success_rate']:.2f}  "
              f"eta {row['eta_mean']:.2f}")
