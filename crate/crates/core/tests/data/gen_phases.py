# Regenerates phases.csv: alpha, theta, k, n, frac(k * alpha * n^theta) at 60 digits.
import random
from mpmath import mp, mpf, floor

mp.dps = 60
rng = random.Random(7)
rows = []
for _ in range(1000):
    alpha = rng.choice(["1", "0.5", "2.25", "3.1"])
    theta = rng.choice(["0.05", "0.08", "0.3", "0.5", "0.75"])
    n = rng.randint(1, 10**7)
    k = rng.randint(-10**7, 10**7)
    # alpha and theta are the binary64 values the library sees
    a = mpf(float(alpha))
    t = mpf(float(theta))
    v = k * a * mpf(n) ** t
    rows.append(f"{alpha},{theta},{k},{n},{mp.nstr(v - floor(v), 25)}")
with open("phases.csv", "w") as fh:
    fh.write("\n".join(rows) + "\n")
