"""Predictive uncertainty on the cubic toy task as alpha varies.

A one-hidden-layer network is trained on 20 noisy samples of y = x^3 with
the observation noise frozen at its generating value (sigma^2 = 9).
Larger alpha spreads the posterior, so the predictive standard deviation
over the input grid widens monotonically from the variational limit
(alpha ~ 0) through alpha = 0.5 to alpha = 1.
"""

import numpy as np

from bbalpha.cli import run_toy_predictive
from bbalpha.likelihoods import gen_toy_cubic

alphas = [1e-6, 0.5, 1.0]
results = run_toy_predictive(alphas, seed=0)
data = gen_toy_cubic(0)

print("%10s %16s %16s" % ("alpha", "mean pred std", "fit RMSE vs x^3"))
for a in alphas:
    grid, mean, std = results[a]
    on_train = np.interp(data.features[:, 0], grid, mean)
    rmse = float(np.sqrt(np.mean((on_train - data.features[:, 0] ** 3) ** 2)))
    print("%10g %16.4f %16.4f" % (a, float(std.mean()), rmse))

print()
a = 1.0
grid, mean, std = results[a]
print("predictive band at alpha = %g (ascii, +/- 2 std):" % a)
lo, hi = (mean - 2 * std).min(), (mean + 2 * std).max()
width = 60
for i in range(0, len(grid), 4):
    row = [" "] * width
    c0 = int((mean[i] - 2 * std[i] - lo) / (hi - lo) * (width - 1))
    c1 = int((mean[i] + 2 * std[i] - lo) / (hi - lo) * (width - 1))
    cm = int((mean[i] - lo) / (hi - lo) * (width - 1))
    for c in range(c0, c1 + 1):
        row[c] = "-"
    row[cm] = "*"
    print("x=%5.1f |%s|" % (grid[i], "".join(row)))
