"""Independent reference computations shared by the tests."""

import math

import numpy as np
from scipy import integrate


def cartesian_complement(kernel, radius, lam, radio, outer=5000.0, leading=1.0):
    """lam * int_{|x| > radius} kernel(u(x)) dx by 2-D Cartesian quadrature.

    Uses the eight-fold symmetry of a radial integrand (octant 0 <= y <= x)
    and adds the wedge beyond ``x = outer`` from the large-distance
    asymptote ``kernel(u) ~ leading / u``.
    """
    tra, alpha = radio.theta_r_alpha, radio.alpha

    def f(y, x):
        return kernel((x * x + y * y) ** (alpha / 2) / tra)

    def lower(x):
        return math.sqrt(max(radius * radius - x * x, 0.0))

    edges = [radius / math.sqrt(2), radius, 1.5 * radius, 3 * radius, 10 * radius, outer]
    edges = sorted({e for e in edges if e < outer} | {outer})
    edges = [e for e in edges if e >= radius / math.sqrt(2)]
    if radius == 0:
        edges = [0.0] + [e for e in np.geomspace(1e-3 * radio.length_scale, outer, 12)]
    total = 0.0
    for a, b in zip(edges, edges[1:]):
        val, _ = integrate.dblquad(f, a, b, lower, lambda x: x, epsabs=1e-13, epsrel=1e-11)
        total += val
    shape, _ = integrate.quad(lambda t: (1 + t * t) ** (-alpha / 2), 0.0, 1.0, epsabs=1e-14)
    tail = leading * tra * outer ** (2 - alpha) / (alpha - 2) * shape
    return lam * 8.0 * (total + tail)


def success_product_loop(topology, node, activations, radio):
    """Success probability of ``node`` written as an explicit loop over interferers."""
    side = topology.region_side
    y = topology.destinations[node]
    p = math.exp(-radio.theta_r_alpha / radio.rho)
    for j in range(len(topology)):
        if j == node:
            continue
        dx = [(topology.sources[j][k] - y[k] + side / 2) % side - side / 2 for k in range(2)]
        d = math.hypot(*dx)
        p *= 1.0 - activations[j] / (1.0 + d ** radio.alpha / radio.theta_r_alpha)
    return p
