"""Why held-out error struggles to pick the sparse model.

The structural error carries the first-stage noise ``V @ beta0``, which
dominates held-out prediction error. The CV curve is therefore nearly flat
around the true support and the chosen penalty is often too large or small.

Run with ``python demos/03_cross_validation.py``.
"""
from __future__ import annotations

import numpy as np

from hdiv import CvSpec, SimConfig, cv_select, simulate
from hdiv.two_stage import fit_first_stage, predict_conditional_means

data = simulate(SimConfig(n=120), seed=0)
fs = fit_first_stage(data.Z, data.X, "bridge", 0.1)
D = predict_conditional_means(data.Z, fs.alpha_hat)

res = cv_select(D, data.Y, "bridge", CvSpec(), gamma=0.5)
best = int(np.argmin(res.cv_mse))
print(f"chosen lambda {res.lam:.4g}, CV MSE {res.cv_mse[best]:.3f}")
print(f"spread of the CV curve over its lower half: "
      f"{np.ptp(np.sort(res.cv_mse)[: res.cv_mse.size // 2]):.3f}")

# %% Print a coarse view of the curve
for lam, mse in list(zip(res.lambdas, res.cv_mse))[::5]:
    bar = "#" * int(40 * (mse - res.cv_mse.min()) / (np.ptp(res.cv_mse) or 1))
    print(f"{lam:>10.4g} {mse:>8.3f} {bar}")
