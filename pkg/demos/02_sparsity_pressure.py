"""Sweep the mask's L1 weight and watch activation sparsity respond.

The mask multiplies each activation dimension by a learned weight under an
L1 penalty. With a weak penalty every dimension stays alive; cranking the
weight up drives most of them under the hard-zero threshold while the
reconstruction gives up surprisingly little.

Runtime: several minutes (one full default-length training run per weight).
"""

from switchpass import evaluation as ev
from switchpass import training

cfg = training.TrainConfig(seed=7)

betas = [1e-5, 1e-3, 1e-2, 1e-1]
print(f"training {len(betas)} models, one per compression weight ...")
points = ev.sparsity_sweep(cfg, betas)

print(f"\n{'weight':>10s} {'sparsity':>9s} {'recon mse':>10s}")
for p in points:
    bar = "#" * int(round(40 * p.sparsity))
    print(f"{p.beta:10.0e} {p.sparsity:9.3f} {p.l_recon:10.5f}  {bar}")

print("\nsparsity = fraction of mask weights under the hard-zero threshold;")
print("those activation dimensions transfer nothing downstream at inference.")
