"""Two-contact force closure on a sphere as the contacts move off the antipode.

The exact friction cone closes the grasp once the centre angle between the
contacts reaches pi - 2 atan(mu).  A pyramid with an edge in the contact
plane flips at the same angle; a coarse pyramid in another orientation
flips later, never earlier.

Run: python demos/02_force_closure.py
"""
import math

import numpy as np

from multigrasp.contact import ContactFrame, force_closure_feasible, friction_cone, primitive_wrenches


def contacts(theta, r=10.0, roll=0.0):
    # both contacts in the x-z plane, t1 in that plane unless rolled
    out = []
    for ang in (0.0, theta):
        u = np.array([math.sin(ang), 0.0, math.cos(ang)])
        n = -u
        t1 = np.array([math.cos(ang), 0.0, -math.sin(ang)])
        t2 = np.cross(n, t1)
        t1, t2 = math.cos(roll) * t1 + math.sin(roll) * t2, -math.sin(roll) * t1 + math.cos(roll) * t2
        out.append(ContactFrame(r * u, n, t1, t2))
    return out


def flip_angle(mu, n_edges, roll=0.0):
    for deg in np.arange(90.0, 180.001, 0.05):
        fr = contacts(math.radians(deg), roll=roll)
        W = primitive_wrenches(fr, np.zeros(3), [friction_cone(mu, n_edges, f) for f in fr])
        if force_closure_feasible(W)[0]:
            return deg
    return float("nan")


print(" mu   exact   N_f=8 in-plane   N_f=3 rolled")
for mu in (0.2, 0.5, 0.8):
    exact = 180 - 2 * math.degrees(math.atan(mu))
    print(f"{mu:.1f}  {exact:6.2f}   {flip_angle(mu, 8):6.2f}           "
          f"{flip_angle(mu, 3, roll=math.pi / 3):6.2f}")
