"""Two conjugate problems where the tied-site solution is known in closed form.

Example 1 uses the identity design, example 2 an anti-symmetric rank-one
design. For both, the damped fixed-point iteration on the averaged
moment-matching condition lands exactly on the printed closed-form site
precision, and the fitted variance interpolates monotonically between the
variational (alpha -> 0) and EP-like (alpha -> 2) extremes.
"""

import numpy as np

from bbalpha.oracle import (bbalpha_fixed_point, example1_lambda,
                            example2_lambda, true_posterior_linreg)

designs = {
    "example 1": (np.array([[1.0, 0.0], [0.0, 1.0]]), example1_lambda),
    "example 2": (np.array([[1.0, -1.0], [-1.0, 1.0]]), example2_lambda),
}
sigma2 = 1.0
y = np.zeros(2)

for name, (X, lam_fn) in designs.items():
    truth = true_posterior_linreg(X, y, sigma2)
    print("%s: true posterior variance %.6f" % (name, truth.cov[0, 0]))
    print("%8s %14s %14s %14s" % ("alpha", "lambda(form)", "lambda(fp)", "q var"))
    for a in np.linspace(0.1, 1.9, 10):
        lam = lam_fn(float(a), sigma2)
        q = bbalpha_fixed_point(X, y, sigma2, float(a))
        lam_fp = 0.5 * (1.0 / q.var[0] - 1.0)
        print("%8.2f %14.10f %14.10f %14.8f"
              % (a, lam, lam_fp, q.var[0]))
    print()
