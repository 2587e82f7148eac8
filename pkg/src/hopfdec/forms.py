"""Smooth differential forms on R^m given by coefficient functions.

A FormSpec of degree k stores, for each increasing index tuple I, a
coefficient function c_I so that alpha = sum_I c_I(y) dy_I.
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Optional

import numpy as np

from . import _kernels

# the S^2 form is exactly the radial pullback on this shell
S2_SHELL_INNER = 0.75
S2_SHELL_OUTER = 1.25
S2_SHELL_WIDTH = 0.25


@dataclass(frozen=True)
class FormSpec:
    ambient_dim: int
    degree: int
    components: dict = field(default_factory=dict)
    name: str = "custom"
    support_radius: Optional[float] = None
    # optional compiled pullback: kernel(points, simplices, qpts, qwts) -> values
    kernel: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.degree % 2:
            raise ValueError("forms used for Hopf invariants must have even degree 2n")
        for idx in self.components:
            if len(idx) != self.degree or list(idx) != sorted(set(idx)):
                raise ValueError(f"component index {idx} is not an increasing {self.degree}-tuple")
            if max(idx) >= self.ambient_dim:
                raise ValueError(f"component index {idx} exceeds ambient dimension")

    @property
    def n(self):
        return self.degree // 2

    def evaluate(self, y):
        """Coefficients at points y (N, m) as an (N, #components) array, in component order."""
        y = np.atleast_2d(y)
        return np.column_stack([np.broadcast_to(np.asarray(c(y), float), (len(y),))
                                for c in self.components.values()])

    def __add__(self, other):
        if (self.ambient_dim, self.degree) != (other.ambient_dim, other.degree):
            raise ValueError("forms of different type")
        comps = dict(self.components)
        for idx, c in other.components.items():
            if idx in comps:
                a = comps[idx]
                comps[idx] = (lambda a, b: lambda y: a(y) + b(y))(a, c)
            else:
                comps[idx] = c
        return FormSpec(self.ambient_dim, self.degree, comps, f"{self.name}+{other.name}")

    def scaled(self, s):
        comps = {idx: (lambda c: lambda y: s * c(y))(c) for idx, c in self.components.items()}
        return FormSpec(self.ambient_dim, self.degree, comps, f"{s}*{self.name}",
                        self.support_radius)


def simplex_quadrature(k):
    """Degree-2 rule with k+1 points on the reference k-simplex.

    Returns (points (k+1, k), weights (k+1,)); weights sum to 1/k!.
    """
    b = (k + 2 - np.sqrt(k + 2)) / ((k + 1) * (k + 2))
    a = 1.0 - k * b
    bary = np.full((k + 1, k + 1), b)
    np.fill_diagonal(bary, a)
    pts = bary[:, 1:]
    w = np.full(k + 1, 1.0 / (k + 1) / np.prod(np.arange(1, k + 1)))
    return pts, w


def pullback_values(points, simplices, form, order=2):
    """Quadrature of form over the affine images of the simplices.

    points are the map values at vertices (V, m); simplices are sorted
    vertex tuples of size degree+1.  The result may contain non-finite
    values on degenerate inputs; the caller sanitizes.
    """
    if order != 2:
        raise ValueError("only the degree-2 simplex rule is provided")
    k = form.degree
    qpts, qwts = simplex_quadrature(k)
    if form.kernel is not None:
        return form.kernel(points, simplices, qpts, qwts)
    base = points[simplices[:, 0]]
    edges = points[simplices[:, 1:]] - base[:, None, :]                # (S, k, m)
    idx = list(form.components)
    # minors det(edges[:, :, I]) for each component
    minors = np.stack([np.linalg.det(edges[:, :, list(I)]) for I in idx], axis=1)
    out = np.zeros(len(simplices))
    for u, w in zip(qpts, qwts):
        y = base + np.einsum("i,nim->nm", u, edges)
        out += w * np.sum(form.evaluate(y) * minors, axis=1)
    return out


# ---------------------------------------------------------------------------
# builtin catalog
# ---------------------------------------------------------------------------

def _s2_coefficient(sign, axis):
    def coef(y):
        r = np.linalg.norm(y, axis=1)
        chi = _kernels.radial_cutoff_np(r, S2_SHELL_INNER, S2_SHELL_OUTER, S2_SHELL_WIDTH)
        safe = np.where(r > 0, r, 1.0)
        return np.where(chi > 0, sign * chi * y[:, axis] / safe**3, 0.0) / (4 * np.pi)
    return coef


def s2_area_extended():
    """Normalized area form of S^2 pulled back along y -> y/|y|, times a radial cutoff.

    Equal to (y1 dy2^dy3 + y2 dy3^dy1 + y3 dy1^dy2) / (4 pi |y|^3) for
    0.75 <= |y| <= 1.25 and supported in 0.5 < |y| < 1.5; total mass over
    the unit sphere is 1.
    """
    comps = {
        (1, 2): _s2_coefficient(1.0, 0),
        (0, 2): _s2_coefficient(-1.0, 1),
        (0, 1): _s2_coefficient(1.0, 2),
    }

    def kernel(points, simplices, qpts, qwts):
        return _kernels.s2_pullback(points, simplices, qpts, qwts,
                                    S2_SHELL_INNER, S2_SHELL_OUTER, S2_SHELL_WIDTH)

    return FormSpec(3, 2, comps, "s2_area_extended",
                    S2_SHELL_OUTER + S2_SHELL_WIDTH, kernel)


def constant_coefficient(ambient_dim, coefficients, name="constant_coefficient"):
    """Constant form sum_I a_I dy_I; `coefficients` maps increasing index tuples to reals."""
    coefficients = dict(coefficients)
    if not coefficients:
        raise ValueError("need at least one coefficient")
    degree = len(next(iter(coefficients)))
    comps = {tuple(I): (lambda a: lambda y: np.full(len(y), a))(float(a))
             for I, a in coefficients.items()}
    return FormSpec(ambient_dim, degree, comps, name)


def symplectic_form(n):
    """sum_j dx_j ^ dy_j on R^{2n} in interleaved coordinates."""
    return constant_coefficient(2 * n, {(2 * j, 2 * j + 1): 1.0 for j in range(n)}, "symplectic")


def builtin_form(name, **params):
    if name == "s2_area_extended":
        return s2_area_extended()
    if name == "constant_coefficient":
        m = int(params.get("ambient_dim", 3))
        coeffs = params.get("coefficients", {(0, 1): 1.0})
        coeffs = {tuple(int(i) for i in k.split(",")) if isinstance(k, str) else tuple(k): v
                  for k, v in coeffs.items()}
        return constant_coefficient(m, coeffs)
    raise KeyError(f"unknown form {name!r}")


def all_index_tuples(m, k):
    return list(combinations(range(m), k))
