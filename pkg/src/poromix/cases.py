"""Problem definitions: manufactured solutions and the fixed-load benchmark.

A case bundles material parameters, boundary partition data, load and
boundary functions, and (when known) the exact fields.  Loads and boundary
data are also provided in separated form, a sum of time-coefficient times
spatial-profile terms, so the time stepper can assemble each spatial vector
once and take linear combinations per step.
"""

import numpy as np

from .assembly import MaterialParams
from .mesh import BoundaryPartition


class ManufacturedCase:
    """Exact solution with derived source/boundary data.

    Exact fields are callables of (t, x, y); u and z return (..., 2), sigma
    returns (..., 2, 2), gamma12 returns the independent entry of the skew
    gradient part.  f_terms/g_terms/u0_terms/p0_terms are lists of
    (time_coefficient, spatial_profile) pairs whose products sum to f, g,
    u|boundary, p|boundary.
    """

    def __init__(self, params, *, u=None, p=None, sigma=None, z=None,
                 gamma12=None, f=None, g=None, f_terms=(), g_terms=(),
                 u0_terms=(), p0_terms=(), gamma_t=(), gamma_f=(),
                 traction=None, normal_flux=None, name="case"):
        self.params = params
        self.u = u
        self.p = p
        self.sigma = sigma
        self.z = z
        self.gamma12 = gamma12
        self.f = f
        self.g = g
        self.f_terms = list(f_terms)
        self.g_terms = list(g_terms)
        self.u0_terms = list(u0_terms)
        self.p0_terms = list(p0_terms)
        self.gamma_t = tuple(gamma_t)
        self.gamma_f = tuple(gamma_f)
        self.traction = traction
        self.normal_flux = normal_flux
        self.name = name

    @property
    def has_exact(self):
        return self.u is not None

    def partition(self, mesh):
        return BoundaryPartition(mesh, gamma_t=self.gamma_t, gamma_f=self.gamma_f)

    def fields(self, t, x, y):
        """All exact and derived values at (t, x, y)."""
        if not self.has_exact:
            raise ValueError(f"{self.name} has no closed-form solution")
        return {
            "u": self.u(t, x, y),
            "p": self.p(t, x, y),
            "sigma": self.sigma(t, x, y),
            "z": self.z(t, x, y),
            "gamma12": self.gamma12(t, x, y),
            "f": self.f(t, x, y),
            "g": self.g(t, x, y),
        }


def standard_case(mu=10.0, lam=10.0, s0=1.0, kappa=1.0, alpha=1.0):
    """Smooth trigonometric solution on the unit square, full natural
    boundary (displacement and pressure given on all of the boundary).

    u = (x cos t, (1 + y^2) cos(t+1) sin(pi x)),  p = x^2 y cos(t^2);
    sigma, z, gamma, f, g follow from the constitutive relations.
    """
    params = MaterialParams(mu=mu, lam=lam, s0=s0, kappa=kappa, alpha=alpha)

    def u(t, x, y):
        return np.stack(
            [x * np.cos(t), (1 + y**2) * np.cos(t + 1) * np.sin(np.pi * x)],
            axis=-1,
        )

    def p(t, x, y):
        return x**2 * y * np.cos(t**2)

    def div_u(t, x, y):
        return np.cos(t) + 2 * y * np.cos(t + 1) * np.sin(np.pi * x)

    def shear(t, x, y):
        # the off-diagonal entry of grad u (only du2/dx is nonzero)
        return np.pi * (1 + y**2) * np.cos(t + 1) * np.cos(np.pi * x)

    def sigma(t, x, y):
        d = div_u(t, x, y)
        w = shear(t, x, y)
        ap = alpha * p(t, x, y)
        s11 = 2 * mu * np.cos(t) + lam * d - ap
        s22 = (
            4 * mu * y * np.cos(t + 1) * np.sin(np.pi * x) + lam * d - ap
        )
        s12 = mu * w
        row0 = np.stack([s11, s12], axis=-1)
        row1 = np.stack([s12, s22], axis=-1)
        return np.stack([row0, row1], axis=-2)

    def z(t, x, y):
        c = kappa * np.cos(t**2)
        return np.stack([2 * x * y * c, x**2 * c], axis=-1)

    def gamma12(t, x, y):
        return -0.5 * shear(t, x, y)

    def f(t, x, y):
        c2 = np.cos(t + 1)
        c3 = np.cos(t**2)
        f1 = -2 * np.pi * (lam + mu) * y * c2 * np.cos(np.pi * x) + 2 * alpha * x * y * c3
        f2 = (
            (np.pi**2 * mu * (1 + y**2) - 4 * mu - 2 * lam)
            * np.sin(np.pi * x) * c2
            + alpha * x**2 * c3
        )
        return np.stack([f1, f2], axis=-1)

    def g(t, x, y):
        return (
            -2 * s0 * t * np.sin(t**2) * x**2 * y
            - alpha * np.sin(t)
            - 2 * alpha * y * np.sin(t + 1) * np.sin(np.pi * x)
            - 2 * kappa * y * np.cos(t**2)
        )

    f_terms = [
        (
            lambda t: np.cos(t + 1),
            lambda x, y: np.stack(
                [
                    -2 * np.pi * (lam + mu) * y * np.cos(np.pi * x),
                    (np.pi**2 * mu * (1 + y**2) - 4 * mu - 2 * lam)
                    * np.sin(np.pi * x),
                ],
                axis=-1,
            ),
        ),
        (
            lambda t: np.cos(t**2),
            lambda x, y: np.stack([2 * alpha * x * y, alpha * x**2], axis=-1),
        ),
    ]
    g_terms = [
        (lambda t: -2 * t * np.sin(t**2), lambda x, y: s0 * x**2 * y),
        (lambda t: -np.sin(t), lambda x, y: alpha * np.ones_like(x)),
        (
            lambda t: -np.sin(t + 1),
            lambda x, y: 2 * alpha * y * np.sin(np.pi * x),
        ),
        (lambda t: np.cos(t**2), lambda x, y: -2 * kappa * y),
    ]
    u0_terms = [
        (
            lambda t: np.cos(t),
            lambda x, y: np.stack([x, np.zeros_like(x)], axis=-1),
        ),
        (
            lambda t: np.cos(t + 1),
            lambda x, y: np.stack(
                [np.zeros_like(x), (1 + y**2) * np.sin(np.pi * x)], axis=-1
            ),
        ),
    ]
    p0_terms = [(lambda t: np.cos(t**2), lambda x, y: x**2 * y)]

    return ManufacturedCase(
        params,
        u=u,
        p=p,
        sigma=sigma,
        z=z,
        gamma12=gamma12,
        f=f,
        g=g,
        f_terms=f_terms,
        g_terms=g_terms,
        u0_terms=u0_terms,
        p0_terms=p0_terms,
        name="standard",
    )


def fixed_load_case(lam, mu=10.0, kappa=1.0, s0=1e-3, alpha=1.0):
    """Fixed body load f = (xy, sin t) with traction-free/no-flow conditions
    on the bottom, left, and right sides and homogeneous displacement and
    pressure data on the top.  No closed-form solution; used for the
    incompressibility sweep against a fine-mesh reference.
    """
    params = MaterialParams(mu=mu, lam=lam, s0=s0, kappa=kappa, alpha=alpha)
    f_terms = [
        (
            lambda t: 1.0,
            lambda x, y: np.stack([x * y, np.zeros_like(x)], axis=-1),
        ),
        (
            lambda t: np.sin(t),
            lambda x, y: np.stack([np.zeros_like(x), np.ones_like(x)], axis=-1),
        ),
    ]

    def f(t, x, y):
        return np.stack([x * y, np.sin(t) * np.ones_like(x)], axis=-1)

    def g(t, x, y):
        return np.zeros_like(x)

    return ManufacturedCase(
        params,
        f=f,
        g=g,
        f_terms=f_terms,
        g_terms=[],
        u0_terms=[],
        p0_terms=[],
        gamma_t=("bottom", "left", "right"),
        gamma_f=("bottom", "left", "right"),
        name="fixed_load",
    )
