"""Exponent triples and the norm hierarchy used by the solver.

Shows the piecewise admissible exponent, the pair condition, the spectral
fractional norms and the running path norms (Z, X, Y) of a trajectory.
"""

import math

import numpy as np

from stochwave import (
    BoundaryCondition,
    ExponentTriple,
    admissible_r,
    build_basis,
    default_grid,
    fractional_norm,
    h_a_norm,
    path_norms,
    validate_pair_condition,
)

PI = math.pi

print("admissible exponents r(p, q):")
for p, q in ((2, 2), (4, 4), (8, 8), (16, 8), (math.inf, 4), (math.inf, math.inf)):
    print(f"  (p, q) = ({p}, {q}) -> r = {admissible_r(p, q):.6f}")

print("\npair condition (q > 2, 0 < r < min(1, (q-2)/2), r != 1 - 1/q):")
for q, r in ((4, 0.5), (4, 0.75), (2, 0.1), (3, 0.49)):
    print(f"  (q, r) = ({q}, {r}): {validate_pair_condition(q, r)}")

basis = build_basis(PI, PI, BoundaryCondition.DIRICHLET, 6.0)
grid = default_grid(basis)
u = basis.unit_field(1, 1)
print(f"\nfractional norms of the fundamental mode (lam^2 = 2):")
print(f"  ||u||_L2            = {fractional_norm(u, 0.0, 2):.6f}")
print(f"  ||(I+A)^(1/2) u||_L2 = {h_a_norm(u):.6f}  (= sqrt 3)")
print(f"  ||(I+A)^(1/4) u||_L4 = {fractional_norm(u, 0.5, 4, grid):.6f}")

# path norms of a frozen-in-time trajectory: X_T = T^(1/p) ||u||_E
class Frozen:
    def __init__(self, basis, coeffs, times):
        self.basis = basis
        self.u = np.tile(coeffs, (len(times), 1))
        self.times = times


triple = ExponentTriple.from_pq(2, 2)
times = np.linspace(0.0, 1.0, 101)
x, z, y = path_norms(Frozen(basis, u.coeffs, times), triple, 1.0)
print(f"\nfrozen single-mode trajectory over [0, 1] at (p, q) = (2, 2):")
print(f"  Z_T = {z.value:.6f}, X_T = {x.value:.6f}, "
      f"Y_T = {y.value:.6f} (= sqrt 6 = {math.sqrt(6):.6f})")
print(f"  identity Y^p = Z^p + X^p: "
      f"{np.isclose(y.value ** 2, z.value ** 2 + x.value ** 2)}")
