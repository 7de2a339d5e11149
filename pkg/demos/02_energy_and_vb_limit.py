"""The tied-site energy, its Monte-Carlo estimator and the alpha -> 0 limit.

On a small conjugate regression problem the energy has a closed form, so we
can watch the K-sample reparameterized estimator converge to it, and watch
the alpha energy approach the variational free energy as alpha shrinks.
"""

import numpy as np

from bbalpha.energy import (AlphaParam, bbalpha_energy_exact,
                            bbalpha_energy_mc, vb_energy_exact, vb_energy_mc)
from bbalpha.expfam import FactorizedGaussian
from bbalpha.likelihoods import Dataset, LinearRegression
from bbalpha.optim import default_prior

rng = np.random.default_rng(0)
n, d = 12, 3
X = rng.normal(size=(n, d))
y = X @ np.array([1.0, -0.5, 0.3]) + rng.normal(0, 0.5, size=n)
data = Dataset(X, y)
model = LinearRegression(d, sigma2=0.25)
q = FactorizedGaussian(rng.normal(0, 0.3, size=d), np.full(d, -1.0))
prior = default_prior(d)

alpha = AlphaParam(0.8, n)
exact = bbalpha_energy_exact(q, prior, model, data, alpha)
print("exact energy at alpha=0.8: %.6f" % exact)
print()
print("%8s %14s %12s" % ("K", "MC estimate", "abs error"))
for k in (10, 100, 1000, 10000, 100000):
    eps = np.random.default_rng(1).standard_normal((k, d))
    est = bbalpha_energy_mc(q, prior, model, data, np.arange(n), alpha, eps)
    print("%8d %14.6f %12.2e" % (k, est.value, abs(est.value - exact)))

print()
vb = vb_energy_exact(q, prior, model, data)
print("variational free energy (closed form): %.6f" % vb)
print("%10s %14s %12s" % ("alpha", "exact energy", "gap to VB"))
for a in (0.5, 0.1, 0.01, 0.001):
    e = bbalpha_energy_exact(q, prior, model, data, AlphaParam(a, n))
    print("%10g %14.6f %12.2e" % (a, e, abs(e - vb)))

print()
eps = np.random.default_rng(2).standard_normal((500, d))
tiny = bbalpha_energy_mc(q, prior, model, data, np.arange(n),
                         AlphaParam(1e-6, n), eps)
vbmc = vb_energy_mc(q, prior, model, data, np.arange(n), eps)
print("MC at alpha=1e-6 vs VB path on shared samples: %.8f vs %.8f"
      % (tiny.value, vbmc.value))
