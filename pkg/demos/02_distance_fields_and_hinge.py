"""Signed distance fields and the hinge collision cost.

Builds a field for a circular obstacle, probes distances and gradients,
shows the hinge activation band, and dumps the grid to CSV for plotting.
"""

import numpy as np

from scate import Bounds, Circle, Sdf, SphereModel, hinge_cost, robot_spheres

bounds = Bounds(0.0, 4.0, 0.0, 4.0)
field = Sdf.build([Circle((2.0, 2.0), 0.3)], bounds, cell=0.02)
print(f"grid {field.nx} x {field.ny}, cell {field.cell} m")

for p in [(2.0, 2.0), (2.0, 2.3), (3.0, 2.0), (0.1, 0.1)]:
    d, g = field.query(p)
    print(f"  D{p} = {d:+.3f} m   grad = ({g[0]:+.2f}, {g[1]:+.2f})")

print("\nhinge cost (eps = 0.4):")
for d in [-0.2, 0.0, 0.2, 0.4, 0.6]:
    c, slope = hinge_cost(d, 0.4)
    print(f"  clearance {d:+.1f} -> cost {c:.2f}, slope {slope:+.1f}")

# two-sphere body: one at the center of mass, one offset forward
spheres = SphereModel([[0.0, 0.0], [0.3, 0.0]], [0.35, 0.2])
x = np.array([1.4, 0.0, 2.0, 0.0, np.pi / 2, 0.0])
centers, jac = robot_spheres(x, spheres)
print("\nsphere centers at psi = pi/2:")
for c, r in zip(centers, spheres.radii):
    d, _ = field.query(c)
    cost, _ = hinge_cost(d - r, 0.4)
    print(f"  center ({c[0]:.2f}, {c[1]:.2f}) r={r}: clearance {d - r:+.3f}, "
          f"cost {cost:.3f}")

field.to_csv("/tmp/sdf_grid.csv")
print("\nwrote /tmp/sdf_grid.csv (row-major grid, header carries geometry)")

# empty workspace: the sentinel keeps every cost at exactly zero
empty = Sdf.build([], bounds, cell=0.1)
print(f"empty-workspace field value: {empty.query((2.0, 2.0))[0]:.1f} m")
