"""
The fingerprinting identity, exactly
====================================

For any f from {-1, +1}^t to [-1, 1] and p uniform on [-alpha, alpha],
E[r(alpha, p) f(x) sum_i (x_i - p) + 2(|p| - f(x) p)] = alpha.
The x-expectation is a finite sum, so the value is exact up to rounding.
"""

import numpy as np

from dppersonal import attacks

rng = np.random.default_rng(0)
table = rng.uniform(-1, 1, 2 ** 6)
funcs = dict(attacks.fingerprint_battery(), random_table=lambda X: table)

for name, f in funcs.items():
    t = 6 if name == "random_table" else 5
    values = [attacks.fingerprint_lhs_exact(f, a, t) for a in (0.1, 0.5, 1.0)]
    buv = attacks.fingerprint_buv_lhs_exact(f, t)
    print(f"{name:>16}: identity {['%.12f' % v for v in values]}   BUV {buv:.6f} (>= 1/3)")
