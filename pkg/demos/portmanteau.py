"""
Portmanteau test on simulated changes
=====================================

The statistic ``T (T + 2) sum_k rho(k)^2 / (T - k)`` is compared with a
chi-square with ``L`` degrees of freedom. White noise gives uniform p-values.
Autocorrelated changes give tiny ones.
"""

import numpy as np

from memarb.evaluation import autocorr, chi2_pvalue, portmanteau

rng = np.random.default_rng(1)

###############################################################################
# Autocorrelation as used here is not mean-centred.

print("rho(2) of (1, 2, 3, 4):", autocorr([1.0, 2.0, 3.0, 4.0], 2))

###############################################################################
# With two degrees of freedom the tail is exactly ``exp(-Q/2)``.

for Q in (0.5, 2.0, 10.0):
    print(f"Q={Q:5.1f}  p={chi2_pvalue(Q, 2):.10f}  exp(-Q/2)={np.exp(-Q / 2):.10f}")

###############################################################################
# Under white noise about 10% of p-values fall below 0.1.

p_white = np.array([portmanteau(rng.standard_normal(2000)).p_value for _ in range(200)])
print(f"white noise: share of p < 0.1 = {np.mean(p_white < 0.1):.3f}")

###############################################################################
# AR(1) changes with coefficient 0.6 are flagged every time.


def ar1(phi, T):
    e = rng.standard_normal(T)
    out = np.empty(T)
    out[0] = e[0]
    for t in range(1, T):
        out[t] = phi * out[t - 1] + e[t]
    return out


p_ar = np.array([portmanteau(ar1(0.6, 2000)).p_value for _ in range(50)])
print(f"AR(1) 0.6: share of p < 0.01 = {np.mean(p_ar < 0.01):.2f}")
