"""How the alpha family interpolates between the two KL divergences.

Tabulates D_alpha between a pair of Gaussians over an alpha grid and shows
the mass-covering / mode-seeking transition: alpha near 0 reproduces
KL[q||p], alpha near 1 reproduces KL[p||q], and alpha = 0.5 is symmetric.
"""

import numpy as np

from bbalpha.errors import UndefinedDivergence
from bbalpha.oracle import GaussianDist, alpha_divergence, kl_divergence

p = GaussianDist([0.0, 0.0], np.diag([1.0, 4.0]))
q = GaussianDist([1.0, -0.5], np.diag([2.0, 1.0]))

print("KL[q||p] = %.6f   (alpha -> 0 limit)" % kl_divergence(q, p))
print("KL[p||q] = %.6f   (alpha -> 1 limit)" % kl_divergence(p, q))
print()
print("%8s %12s" % ("alpha", "D_alpha[p||q]"))
for a in np.linspace(-0.5, 1.5, 21):
    try:
        print("%8.2f %12.6f" % (a, alpha_divergence(p, q, float(a))))
    except UndefinedDivergence:
        print("%8.2f %12s" % (a, "inf"))

print()
print("Hellinger symmetry at alpha = 0.5:")
print("  D_0.5[p||q] = %.10f" % alpha_divergence(p, q, 0.5))
print("  D_0.5[q||p] = %.10f" % alpha_divergence(q, p, 0.5))
