"""
Building a survival dataset and moving it through CSV
=====================================================

A record is (Y, delta, D, X): the follow-up time, the event indicator
(1 = the event was observed, 0 = censored), the treatment arm, and the
covariate row. The Dataset container validates all of that up front so
the estimators never have to.
"""

import numpy as np

import survcbps as sc

rng = np.random.default_rng(7)

n, p = 12, 3
x = rng.standard_normal((n, p))
d = rng.integers(0, 2, n)
t = rng.exponential(2.0, n)
c = rng.exponential(4.0, n)
y = np.minimum(t, c)
delta = (t <= c).astype(int)

data = sc.Dataset(y=y, delta=delta, d=d, x=x)
print("n =", data.n, " p =", data.p)
print("columns:", data.covariate_names)
print(sc.summarize(data))

# round trip through the CSV layer
path = "/tmp/demo_roundtrip.csv"
sc.write_csv(data, path)
back = sc.parse_csv(path)

print("y match:", np.array_equal(back.y, data.y))
print("x match:", np.array_equal(back.x, data.x))

# the parser reports the offending cell when a file is malformed
with open(path) as fh:
    lines = fh.read().splitlines()
lines[3] = lines[3].replace(lines[3].split(",")[0], "not-a-number", 1)
with open("/tmp/demo_broken.csv", "w") as fh:
    fh.write("\n".join(lines))

try:
    sc.parse_csv("/tmp/demo_broken.csv")
except sc.RowParseError as err:
    print("parse error:", err)
