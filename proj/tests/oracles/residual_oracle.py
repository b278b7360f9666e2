"""Residual delta = e_y - softmax(z) for z = (1, 2, 3), y = 2 (1-based), at 30 digits."""
from mpmath import mp, exp, mpf

mp.dps = 30
z = [mpf(1), mpf(2), mpf(3)]
total = sum(exp(v) for v in z)
p = [exp(v) / total for v in z]
delta = [(1 if k == 1 else 0) - p[k] for k in range(3)]
print("delta =", ", ".join(mp.nstr(d, 20) for d in delta))
print("ce =", mp.nstr(-mp.log(p[1]), 20))
