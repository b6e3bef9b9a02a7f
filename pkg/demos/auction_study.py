"""First-price auction study at demo scale.

Simulates repeated auctions with 5-30 bidders, fits three estimators of the
expected winning bid, and scores them on bidder counts the training data
never saw (31-50). Scenario 1 has a correctly specified benchmark; scenario
2 draws values from a beta distribution the benchmark gets wrong; scenario 3
adds overbidding.
"""

from structreg.auction import AuctionScenario, auction_experiment
from structreg.data import SeededRng
from structreg.metrics import metrics_table

TRIALS = 30  # enough to see the orderings; the paper-scale runs use 100

for index, label in (
    (1, "uniform values (benchmark correct)"),
    (2, "beta values (benchmark misspecified)"),
    (3, "overbidding (benchmark misspecified)"),
):
    records, _ = auction_experiment(
        AuctionScenario.from_index(index), trials=TRIALS, rng=SeededRng(7)
    )
    table = metrics_table(records)
    print(f"scenario {index}: {label}")
    print(f"  {'estimator':>12s} {'domain':>6s} {'bias':>9s} {'var':>12s} {'mse':>12s}")
    for (name, domain), row in sorted(table.items()):
        print(
            f"  {name:>12s} {domain:>6s} {row.bias:9.4f} {row.variance:12.4f} {row.mse:12.4f}"
        )
    print()

print("patterns to notice: the structural rows are exactly zero in scenario 1;")
print("the statistical fit collapses out-of-domain everywhere; the regularized")
print("fit stays close to the truth even under a misspecified benchmark (scenario 2).")
