"""Writes tabletop.xyz: an 80 x 60 cm table top with a plate and a cup on it, plus floor clutter."""
import math
import random

rng = random.Random(7)
pts = []
for i in range(80):
    for j in range(60):
        x, y = i * 0.01, j * 0.01
        pts.append((x, y, 0.74 + rng.gauss(0, 0.002)))
# plate: a low disc near the west edge
for k in range(300):
    r, a = 0.1 * math.sqrt(rng.random()), rng.uniform(0, 2 * math.pi)
    pts.append((0.15 + r * math.cos(a), 0.3 + r * math.sin(a), 0.76 + rng.gauss(0, 0.002)))
# cup: a ring of points in the north-east corner
for k in range(200):
    a, h = rng.uniform(0, 2 * math.pi), rng.uniform(0.0, 0.1)
    pts.append((0.65 + 0.04 * math.cos(a), 0.48 + 0.04 * math.sin(a), 0.75 + h))
for k in range(400):
    pts.append((rng.uniform(-0.3, 1.1), rng.uniform(-0.3, 0.9), rng.uniform(0.0, 0.05)))
with open("tabletop.xyz", "w") as f:
    f.write("# x y z in meters\n")
    for p in pts:
        f.write("%.4f %.4f %.4f\n" % p)
