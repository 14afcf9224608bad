"""A small end-to-end verification campaign with a constants ledger.

Runs the cluster-exponent sweep, the homogeneous Strichartz stability
check and the stochastic moment estimators at desk scale, then merges
everything into one ledger.
"""

import math

from stochwave import (
    BoundaryCondition,
    ExponentTriple,
    SweepSpec,
    build_basis,
    build_ledger,
    verify_cluster,
    verify_homogeneous_strichartz,
    verify_stochastic,
    verify_stopped_identity,
)

PI = math.pi
D = BoundaryCondition.DIRICHLET

print("== spectral cluster exponents ==")
basis = build_basis(PI, PI, D, 24.0)
sweep = SweepSpec(inequality="cluster", qs=(2.0, 4.0, 8.0),
                  lambdas=tuple(range(3, 21)), restarts=100, seed=1)
entries = []
for q, rep in sorted(verify_cluster(basis, sweep).items()):
    print(f"  q={q:g}: empirical slope {rep.slope:+.4f}, "
          f"target rho = {rep.rho:.4f} (+0.15 tolerance) -> "
          f"{'ok' if rep.passed else 'VIOLATED'}")
    entries.append(rep.ledger_entry())

print("\n== homogeneous space-time bound, cutoff stability ==")
triple = ExponentTriple.from_pq(4, 4)
sweep = SweepSpec(inequality="hom", cutoffs=(12.0, 24.0), samples=80,
                  nodes=51, seed=2)
rep = verify_homogeneous_strichartz(D, PI, PI, triple, sweep)
for cut, ratio in sorted(rep.max_ratios.items()):
    print(f"  cutoff {cut:g}: worst ratio {ratio:.4f}")
print(f"  stable under cutoff doubling: {rep.stable}")
entries.append(rep.ledger_entry())

print("\n== stochastic moment constants ==")
sweep = SweepSpec(inequality="stoch", cutoffs=(8.0, 16.0), nodes=26,
                  paths=2000, seed=3)
reports, mc_entries = verify_stochastic(D, PI, PI,
                                        ExponentTriple.from_pq(2, 2), sweep)
for e in mc_entries:
    print(f"  {e.name} at cutoff {e.resolution['Lambda']:g}: "
          f"{e.value:.4f}  CI [{e.ci_low:.4f}, {e.ci_high:.4f}]")
entries.extend(mc_entries)

print("\n== stopped-integral identity over an ensemble ==")
sweep = SweepSpec(inequality="stopped", cutoffs=(4.0,), nodes=65,
                  paths=200, seed=4)
stopped = verify_stopped_identity(D, PI, PI, sweep)
print(f"  max discrepancy over {stopped.paths} paths: "
      f"{stopped.max_discrepancy:.2e}")

ledger = build_ledger(entries)
print(f"\nledger holds {len(ledger.entries)} empirical constants; "
      f"serialize with ledger.to_json()")
