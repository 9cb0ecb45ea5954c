"""Quadrature rules on the reference triangle and the unit segment."""

import numpy as np

# Symmetric rules on the reference triangle {x,y >= 0, x+y <= 1};
# weights sum to the reference area 1/2.
_D4_A = 0.445948490915965
_D4_B = 0.091576213509771
_D4_WA = 0.223381589678011
_D4_WB = 0.109951743655322

_D5_A = 0.470142064105115
_D5_B = 0.101286507323456
_D5_WA = 0.132394152788506
_D5_WB = 0.125939180544827


def _sym3(a):
    b = 1.0 - 2.0 * a
    return [(a, a), (b, a), (a, b)]


def tri_rule(degree):
    """Points (q,2) and weights (q,) exact for polynomials of `degree`."""
    if degree <= 1:
        pts = np.array([[1 / 3, 1 / 3]])
        wts = np.array([0.5])
    elif degree == 2:
        pts = np.array(_sym3(1 / 6))
        wts = np.full(3, 1 / 6)
    elif degree in (3, 4):
        pts = np.array(_sym3(_D4_A) + _sym3(_D4_B))
        wts = 0.5 * np.array([_D4_WA] * 3 + [_D4_WB] * 3)
    elif degree == 5:
        pts = np.array([[1 / 3, 1 / 3]] + _sym3(_D5_A) + _sym3(_D5_B))
        wts = 0.5 * np.array([0.225] + [_D5_WA] * 3 + [_D5_WB] * 3)
    else:
        pts, wts = _duffy_rule(degree)
    return pts, wts


def _duffy_rule(degree):
    # Collapsed tensor Gauss rule; the Duffy map introduces a factor (1-u)
    # so n points per direction handle degree 2n-2 safely.
    n = degree // 2 + 2
    x, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    U, V = np.meshgrid(u, u, indexing="ij")
    WU, WV = np.meshgrid(wu, wu, indexing="ij")
    px = U
    py = V * (1.0 - U)
    wts = WU * WV * (1.0 - U)
    return np.column_stack([px.ravel(), py.ravel()]), wts.ravel()


def segment_rule(npts):
    """Gauss-Legendre points/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w
