"""Principal geodesic of four points on the axes.

The loss over directions through the mean has more than one local minimum,
so a single descent can stop at the wrong axis. Restarts find the global one,
and squeezing the points toward a line makes the loss locally convex there.

    python demos/pga_cross.py
"""
import math

import numpy as np

from hypembed import pga

cross = np.array([[0.8, 0.0], [-0.8, 0.0], [0.0, 0.7], [0.0, -0.7]])
prob = pga.pga_prepare(cross)
for deg in range(0, 180, 15):
    t = math.radians(deg)
    print(f"  {deg:3d} deg  loss {pga.pga_loss([math.cos(t), math.sin(t)], prob):8.4f}")

fit = pga.fit_geodesic(prob, restarts=8)
print("direction", np.round(fit.direction, 6), "loss", round(fit.loss, 6))
print("local minima found:", [round(v, 4) for v in fit.local_minima])

axis = np.array([1.0, 1.0]) / math.sqrt(2)
along = np.outer(cross @ axis, axis)
squeezed = pga.pga_prepare(along + 0.05 * (cross - along))
sfit = pga.fit_geodesic(squeezed)
flags, ok = pga.convexity_certificate(sfit.direction, squeezed)
print("\nsqueezed copy: direction", np.round(sfit.direction, 4), "certified", ok)
