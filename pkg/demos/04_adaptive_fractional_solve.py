"""Full adaptive solve of (-lap)^s u = 1 on the square.

Runs the multimesh adaptive loop at a coarse pole count (kappa = 0.6 keeps N
small so the demo finishes in seconds) and compares the union-mesh estimate
with the true error from a 10^4-mode eigen-series reference.

The equivalent command-line invocation at production settings is

    fracadapt run --s 0.5 --domain square --f one --tol 4e-4 --out runs/caseI
"""

from fracadapt import (
    DomainSpec,
    RhsField,
    RunConfig,
    decay_rate,
    run,
    spectral_reference,
)

domain = DomainSpec("square")
f = RhsField.one()
s = 0.5

reference = spectral_reference(domain, f, s)
print(f"series reference norm: {reference.norm():.6f}")

config = RunConfig(
    s=s,
    domain=domain,
    f=f,
    theta=0.5,
    tol=2e-3,
    kappa=0.6,  # coarse rational scheme: fast demo, looser bound
    max_iterations=25,
    initial_cells=128,
)
result = run(config, reference=reference)

print(f"\nN = {result.scheme.N} parametric problems, stopped: {result.stopped}\n")
print("  m  solved  union dofs   estimate    true error  effectivity")
for r in result.records:
    print(
        f"{r.m:3d}  {r.solved_problems:5d}  {r.union_dofs:9d}   "
        f"{r.eta_union:.3e}   {r.error_ref:.3e}   {r.effectivity:8.2f}"
    )

never = int((result.refine_counts == 0).sum())
print(f"\nnever-refined problems: {never} of {result.scheme.N} "
      f"({100.0 * never / result.scheme.N:.0f}%)")
if sum(r.eta_union is not None for r in result.records) >= 15:
    print(f"estimate decay rate vs union dofs: {decay_rate(result.records):.2f}")
