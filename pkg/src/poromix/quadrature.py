"""Symmetric Gauss rules on the reference triangle and Gauss-Legendre edge rules.

Triangle rules are the classical positive-weight symmetric rules; weights sum
to the reference-triangle area 1/2.  Points are stored in barycentric
coordinates so they can be pushed to any physical cell by a convex
combination of its vertices.
"""

import numpy as np
from numpy.polynomial.legendre import leggauss

MAX_DEGREE = 6


class QuadratureRule:
    """Barycentric points (Q, 3), weights (Q,) summing to 1/2."""

    def __init__(self, degree, bary, weights):
        self.degree = degree
        self.bary = np.asarray(bary, dtype=float)
        self.weights = np.asarray(weights, dtype=float)

    def physical_points(self, cell_vertices):
        """Map to cells given vertex coordinates (..., 3, 2) -> (..., Q, 2)."""
        return np.einsum("qk,...ki->...qi", self.bary, cell_vertices)


def _orbit1():
    return [(1 / 3, 1 / 3, 1 / 3)]


def _orbit3(a):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


def _orbit6(a, b):
    c = 1.0 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def _rule(groups):
    bary, weights = [], []
    for w, pts in groups:
        bary.extend(pts)
        weights.extend([0.5 * w] * len(pts))
    return np.asarray(bary), np.asarray(weights)


# weights are normalized to sum to 1 before the 1/2 area factor
_RULES = {
    1: [(1.0, _orbit1())],
    2: [(1 / 3, _orbit3(1 / 6))],
    4: [
        (0.223381589678011, _orbit3(0.445948490915965)),
        (0.109951743655322, _orbit3(0.091576213509771)),
    ],
    5: [
        (0.225, _orbit1()),
        (0.132394152788506, _orbit3(0.470142064105115)),
        (0.125939180544827, _orbit3(0.101286507323456)),
    ],
    6: [
        (0.116786275726379, _orbit3(0.249286745170910)),
        (0.050844906370207, _orbit3(0.063089014491502)),
        (0.082851075618374, _orbit6(0.310352451033785, 0.053145049844816)),
    ],
}
# no positive-weight 4-point rule of degree 3 exists; reuse the degree-4 rule
_RULES[3] = _RULES[4]


def quadrature(degree):
    """Positive-weight rule exact for polynomials up to the given degree."""
    if not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"quadrature degree must be in 1..{MAX_DEGREE}")
    bary, weights = _rule(_RULES[degree])
    return QuadratureRule(degree, bary, weights)


def edge_rule(npoints):
    """Gauss-Legendre nodes/weights on [-1, 1]."""
    return leggauss(npoints)


def edge_points(mesh, edge_ids, s_nodes):
    """Physical points on directed edges for parameters s in [-1, 1].

    Returns (len(edge_ids), len(s_nodes), 2); s = -1 is the lower-indexed
    vertex of each edge.
    """
    p = mesh.vertices[mesh.edges[edge_ids, 0]]
    q = mesh.vertices[mesh.edges[edge_ids, 1]]
    lam = (np.asarray(s_nodes) + 1.0) / 2.0
    return p[:, None, :] + lam[None, :, None] * (q - p)[:, None, :]
