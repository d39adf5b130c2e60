"""How the switch's predictions sharpen over training.

At every saved checkpoint the switch is scored on held-out frames: mean
absolute error between its predicted pass distance and the measured one,
plus the correlation between the two. Early on the switch knows nothing;
as the lightweight decoder settles into its role the predictions line up
with reality and the scatter hugs the diagonal.

Runtime: about a minute.
"""

from switchpass import evaluation as ev
from switchpass import training

cfg = training.TrainConfig(epochs=400, seed=7, checkpoint_every=50)

print("training with a checkpoint every 50 epochs ...")
result = training.train(cfg)

points = ev.calibration_progress(cfg, result.checkpoints, result.dataset.calibrate)
print(f"\n{'epoch':>6s} {'mae':>8s} {'pearson r':>10s}")
for p in points:
    flag = " (degenerate)" if p.degenerate else ""
    print(f"{p.epoch:6d} {p.mae:8.4f} {p.pearson_r:10.4f}{flag}")

first, last = points[0], points[-1]
print(f"\nMAE fell {first.mae:.3f} -> {last.mae:.3f} and r reached "
      f"{last.pearson_r:.3f}: the switch has learned when the light pass suffices.")

# A coarse text scatter of the final checkpoint: predicted vs actual.
import numpy as np

pred, act = last.predicted, last.actual
lim = float(np.percentile(np.concatenate([pred, act]), 98))
grid = [[" "] * 44 for _ in range(16)]
for p_, a_ in zip(pred, act):
    col = min(43, int(44 * p_ / lim))
    row = min(15, int(16 * a_ / lim))
    grid[15 - row][col] = "o"
print(f"\nactual distance (vertical, 0..{lim:.2f}) vs predicted (horizontal):")
for row in grid:
    print("  |" + "".join(row))
print("  +" + "-" * 44)
