"""Build a small trajectory factor graph by hand and solve it.

The graph anchors the first and last states, chains exact discrete dynamics
between them, and soft-limits the controls. The MAP solution is the
minimum-cost trajectory threading all constraints.
"""

import numpy as np

from scate import (
    ControlLimitFactor,
    ControlLimits,
    DynamicsFactor,
    FactorGraph,
    LtiModel,
    NoiseModel,
    PriorFactor,
    Values,
    control,
    optimize_lm,
    state,
)

N = 8
model = LtiModel.planar(mass=10.0, inertia=1.0, dt=1.0)
x_start = np.array([0.5, 0.0, 0.5, 0.0, 0.0, 0.0])
x_goal = np.array([3.5, 0.0, 3.5, 0.0, np.pi / 4, 0.0])

graph = FactorGraph()
fix = NoiseModel.isotropic(6, 1e-4)
dyn = NoiseModel.isotropic(6, 1e-3)
lim = NoiseModel.isotropic(3, 1e-2)
limits = ControlLimits.symmetric(np.array([2.0, 2.0, 0.5]), threshold_frac=0.05)

graph.add(PriorFactor(state(0), x_start, fix, tag="start"))
graph.add(PriorFactor(state(N), x_goal, fix, tag="goal"))
for i in range(N):
    graph.add(DynamicsFactor(state(i + 1), state(i), control(i),
                             model.f_x, model.f_u, dyn))
    graph.add(ControlLimitFactor(control(i), limits, lim))

print(f"graph: {len(graph)} factors over {len(graph.variables)} variables")

# straight-line initial guess, zero controls
init = Values()
for i in range(N + 1):
    a = i / N
    init.set(state(i), (1 - a) * x_start + a * x_goal)
for i in range(N):
    init.set(control(i), np.zeros(3))

print(f"initial error: {graph.total_error(init):.3e}")
result = optimize_lm(graph, init)
print(f"final error  : {result.final_error:.3e} "
      f"({result.iters} iterations, converged={result.converged})")

print("\n  i    x      y      psi    |  fx      fy      tau")
for i in range(N + 1):
    x = result.values.get(state(i))
    row = f"{i:>3}  {x[0]:5.2f}  {x[2]:5.2f}  {x[4]:6.3f} "
    if i < N:
        u = result.values.get(control(i))
        row += f" | {u[0]:6.3f}  {u[1]:6.3f}  {u[2]:6.3f}"
    print(row)

u_max = max(np.max(np.abs(result.values.get(control(i)))) for i in range(N))
print(f"\nlargest control magnitude: {u_max:.3f} (limits 2 N / 0.5 N m)")
