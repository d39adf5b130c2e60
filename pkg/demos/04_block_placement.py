"""Where in the network should the block sit?

One training run per candidate position, everything else shared. Placing
the block deeper gives the switch better-processed features to judge from
(its prediction correlates more with the measured pass distance), at the
price of a larger always-on prefix. The table makes the trade explicit.

Runtime: a few minutes (one run per placement).
"""

from switchpass import evaluation as ev
from switchpass import training

cfg = training.TrainConfig(seed=7)

placements = [1, 2, 3]
print(f"training {len(placements)} models, one per block position ...")
rows = ev.placement_ablation(cfg, placements)

print(f"\n{'position':>9s} {'switch r':>9s} {'switch mae':>11s} {'prefix macs':>12s}")
for row in rows:
    print(f"{row.placement:9d} {row.pearson_r:9.4f} {row.mae:11.4f} "
          f"{100 * row.prefix_mac_share:11.1f}%")

print("\nprefix macs = share of the always-on trunk in the full pass cost:")
print("a deeper block gives the switch better-processed features to judge from,")
print("but leaves less downstream compute for the light path to save.")
