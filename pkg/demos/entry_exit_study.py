"""Dynamic entry/exit study at demo scale.

Simulates a market of firms facing a rising, noisy profit path under three
expectation regimes, then compares one-step-ahead occupancy forecasts from an
ARX time-series model, the foresight structural model estimated through its
choice-probability Euler equation, and the structurally regularized ARX.
Training uses the first half of the horizon; the profit trend pushes the
interesting dynamics into the second half.
"""

from structreg.data import SeededRng
from structreg.entry_exit import DdcParams, entry_exit_experiment
from structreg.metrics import metrics_table

PARAMS = DdcParams(n_firms=2000)
TRIALS = 5  # demo scale; acceptance runs use 20

for regime, label in (
    ("perfect_foresight", "firms know the future profit path"),
    ("adaptive", "firms expect today's profit to persist"),
    ("myopic", "firms ignore the future entirely"),
):
    records, _ = entry_exit_experiment(regime, PARAMS, trials=TRIALS, rng=SeededRng(3))
    table = metrics_table(records)
    print(f"regime: {regime} ({label})")
    print(f"  {'estimator':>12s} {'domain':>6s} {'bias':>9s} {'var':>10s} {'mse':>10s}")
    for (name, domain), row in sorted(table.items()):
        print(
            f"  {name:>12s} {domain:>6s} {row.bias:9.4f} {row.variance:10.4f} {row.mse:10.4f}"
        )
    print()

print("the structural model dominates when its foresight assumption is true,")
print("drifts when expectations are misspecified (most visibly for myopic firms,")
print("where it anticipates entry waves that never come), and the time-series")
print("model cannot extrapolate the occupancy surge; the regularized fit blends")
print("the two and tracks the myopic market best out-of-domain.")
