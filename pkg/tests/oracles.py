"""Independent reference computations used by the tests.

Nothing here goes through the package's recurrence or derivative maps.
"""
import math
from itertools import product

import numpy as np
from numpy.polynomial import hermite_e as He
from numpy.polynomial import polynomial as P


def hermite_e_monomial(ell):
    """Monomial coefficients (ascending) of He_ell via numpy's explicit conversion."""
    e = np.zeros(ell + 1)
    e[ell] = 1.0
    return He.herme2poly(e)


def poly_eval_monomial(r, d, values, indices, z):
    """Expand every tensor-product basis function into monomials, then evaluate."""
    total = 0.0
    for c, I in zip(values, indices):
        term = c
        for j in range(r):
            a = I.entries.count(j)
            term *= P.polyval(z[j], hermite_e_monomial(a)) / math.sqrt(math.factorial(a))
        total += term
    return total


def gauss_hermite(r, nodes):
    x, w = He.hermegauss(nodes)
    w = w / math.sqrt(2 * math.pi)
    pts = np.array(list(product(x, repeat=r)))
    wts = np.prod(np.array(list(product(w, repeat=r))), axis=1)
    return pts, wts


def central_difference(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        out[idx] = (f(x + e) - f(x - e)) / (2 * h)
    return out
