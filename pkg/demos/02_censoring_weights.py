# Censoring survival curves and the weights they induce.
#
# Censored follow-up shrinks the observed event sample in a way that
# depends on time. The fix is to weight each observed event by the
# inverse probability that it escaped censoring: 1 / K(Y), with K the
# product-limit curve of the censoring distribution fitted per arm
# (censoring events, outcome events swapped).

import numpy as np

import survcbps as sc

rng = np.random.default_rng(21)

n = 400
x = rng.standard_normal((n, 2))
d = rng.integers(0, 2, n)
t = rng.exponential(2.0, n) * (1.0 + 0.5 * d)
# control arm is censored much harder than the treated arm
c = rng.exponential(np.where(d == 1, 8.0, 2.5))
y = np.minimum(t, c)
delta = (t <= c).astype(int)
data = sc.Dataset(y=y, delta=delta, d=d, x=x)

s = sc.summarize(data)
print(f"censoring: treated {s.censor_rate_treated:.0%}, control {s.censor_rate_control:.0%}")

k1 = sc.fit_censoring_km(data, 1)
k0 = sc.fit_censoring_km(data, 0)

grid = np.linspace(0.0, 6.0, 7)
print("\n   u    K1(u)   K0(u)")
for u, a, b in zip(grid, k1.evaluate(grid), k0.evaluate(grid)):
    print(f"{u:4.1f}   {a:.3f}   {b:.3f}")

# the weight 1/K(Y) grows with follow-up time; the floor caps it
w = np.where(d == 1, 1.0 / k1.evaluate(y), 1.0 / k0.evaluate(y))
w = w[delta == 1]
print("\nIPCW weights on observed events:")
print(f"  min {w.min():.2f}  median {np.median(w):.2f}  max {w.max():.2f}")
print(f"  (max possible under the default floor: {1 / 0.05:.0f})")
