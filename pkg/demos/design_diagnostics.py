"""Design diagnostics for two designs: iid Gaussian and the block design.

The off-diagonal Hessian-weighted Gram energy Tr(A_0^2)/p falls as the
sample size grows with p fixed.  The script prints it for n = 100, 400,
1600 together with the operator norm of X^T X and the row-norm tail, then
dumps one full report as JSON.
"""

import numpy as np

from nmfglm import Dataset, GlmModel, logistic
from nmfglm.diagnostics import diagnose, make_block_design, make_gaussian_design, opnorm, trace_A_sq

p = 50
for n in (100, 400, 1600):
    vals = [trace_A_sq(logistic(), make_gaussian_design(n, p, 1.0, seed=s), np.zeros(p)) / p for s in range(20)]
    X = make_gaussian_design(n, p, 1.0, seed=0)
    print(f"n={n:>5}: median Tr(A_0^2)/p {np.median(vals):.5f}   ||X^T X||_op {opnorm(X.T @ X).value:.3f}")

X = make_block_design(400, 20, seed=0)
report = diagnose(GlmModel(logistic(), Dataset(X, np.zeros(400))), n_random_probes=5)
print(report.to_json())
