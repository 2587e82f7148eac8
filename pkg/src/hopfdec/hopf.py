"""Hopf invariant HI_alpha(f) = integral of omega u d(omega), d(omega) = f^* alpha.

The pipeline for a map sampled at the vertices of a triangulated S^{4n-1}:

1. pull alpha back to a 2n-cochain by quadrature over affine image simplices,
2. gate on weak closedness (d of the pullback must be small),
3. solve for a minimal-norm primitive omega by least squares,
4. integrate the cup product omega u d(omega) over the sphere.
"""

import json
import logging
import warnings
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from . import _kernels
from .cochain import (Cochain, coboundary, cochain_norm, cup, integrate_top, lp_norm,
                      solve_primitive)
from .complex import ConeComplex, sphere_from_ring
from .forms import pullback_values

log = logging.getLogger(__name__)

# default closedness budget at the level-3 16-cell mesh, scaled by max edge length
CLOSEDNESS_BUDGET = 0.05
REFERENCE_EDGE = 0.43802251362528366
CLOSEDNESS_MASS = "lumped"


class ClosednessError(ValueError):
    """The pullback is not weakly closed: the map violates the rank <= 2n hypothesis."""

    def __init__(self, residual, budget, where=None):
        at = "" if where is None else f" at t={where:g}"
        super().__init__(f"closedness residual {residual:.3e} exceeds budget {budget:.3e}{at}")
        self.residual = residual
        self.budget = budget
        self.where = where


class OracleError(ValueError):
    pass


class SampledMap:
    """Vertex values of a map on a simplicial complex, with per-simplex differentials.

    By default the differential of each top simplex is that of the affine
    (P1) interpolant of the vertex values.  Builtin smooth maps may instead
    supply `differential`, an (S, m, dim) array of exact differentials in
    orthonormal tangent frames of the simplices; the affine one stays
    available as `affine_differential`.
    """

    def __init__(self, mesh, values, name="tabulated", meta=None, singular_vertices=(),
                 differential=None):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != mesh.count(0):
            raise ValueError(f"{values.shape[0]} values for {mesh.count(0)} vertices")
        if not np.all(np.isfinite(values)):
            raise ValueError("map values must be finite")
        values.setflags(write=False)
        self.mesh = mesh
        self.values = values
        self.name = name
        self.meta = dict(meta or {})
        self.singular_vertices = np.asarray(singular_vertices, dtype=np.int64)
        if differential is not None:
            differential = np.asarray(differential, dtype=float)
            expected = (mesh.count(mesh.dim), values.shape[1], mesh.dim)
            if differential.shape != expected:
                raise ValueError(f"differential has shape {differential.shape}, expected {expected}")
        self._differential = differential

    @property
    def codomain_dim(self):
        return self.values.shape[1]

    @cached_property
    def _affine(self):
        top = self.mesh.simplices[self.mesh.dim]
        return _kernels.affine_jacobians(self.mesh.vertices, top, self.values)

    @property
    def per_simplex_differential(self):
        """(S, m, dim) differentials in an orthonormal tangent frame of each top simplex."""
        if self._differential is not None:
            return self._differential
        return self._affine[0]

    @property
    def affine_differential(self):
        return self._affine[0]

    @property
    def has_exact_differential(self):
        return self._differential is not None

    @property
    def simplex_quality(self):
        return self._affine[1]

    @property
    def simplex_volume(self):
        return self._affine[2]

    @cached_property
    def regular_mask(self):
        """Top simplices away from singular vertices and with non-degenerate domain."""
        top = self.mesh.simplices[self.mesh.dim]
        ok = self.simplex_quality > 1e-14
        if self.singular_vertices.size:
            ok &= ~np.any(np.isin(top, self.singular_vertices), axis=1)
        return ok

    @cached_property
    def lipschitz_estimate(self):
        jac = self.per_simplex_differential[self.regular_mask]
        if len(jac) == 0:
            return 0.0
        return float(np.max(np.linalg.norm(jac, ord=2, axis=(1, 2))))

    def with_values(self, values, name=None, meta=None, differential=None):
        """Same mesh, new values; an exact differential is dropped unless re-supplied."""
        return SampledMap(self.mesh, values, name or self.name,
                          self.meta if meta is None else meta, self.singular_vertices,
                          differential)


@dataclass
class HopfReport:
    value: float
    closedness_residual: float
    primitive_residual: float
    mesh_h: float
    gauge_check: float
    oracle_value: Optional[int] = None
    closedness_budget: float = CLOSEDNESS_BUDGET
    degenerate_simplices: int = 0
    map_name: str = ""
    primitive_ratio: float = 0.0
    omega: Optional[Cochain] = field(default=None, repr=False, compare=False)
    eta: Optional[Cochain] = field(default=None, repr=False, compare=False)

    def to_dict(self):
        d = asdict(self)
        d.pop("omega")
        d.pop("eta")
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


@dataclass
class HomotopySweep:
    times: np.ndarray
    maps: list
    values: np.ndarray
    max_deviation: float
    reports: list = field(default_factory=list, repr=False)


def closedness_budget(mesh, budget=CLOSEDNESS_BUDGET):
    """Budget scaled like O(h), anchored at the level-3 sphere mesh."""
    return budget * mesh.max_edge_length() / REFERENCE_EDGE


def pullback(f, alpha, order=2, return_stats=False):
    if alpha.ambient_dim != f.codomain_dim:
        raise ValueError(f"form lives on R^{alpha.ambient_dim}, map lands in R^{f.codomain_dim}")
    k = alpha.degree
    if k > f.mesh.dim:
        raise ValueError("form degree exceeds domain dimension")
    vals = pullback_values(f.values, f.mesh.simplices[k], alpha, order)
    bad = ~np.isfinite(vals)
    nbad = int(bad.sum())
    if nbad:
        warnings.warn(f"{nbad} degenerate simplices in pullback set to 0", RuntimeWarning)
        vals = np.where(bad, 0.0, vals)
    c = Cochain(k, vals, f.mesh)
    return (c, nbad) if return_stats else c


def _closedness(eta, mass=CLOSEDNESS_MASS):
    if eta.degree >= eta.complex.dim:
        return 0.0
    return cochain_norm(coboundary(eta), mass) / (1.0 + cochain_norm(eta, mass))


def closedness_residual(f, alpha, mass=CLOSEDNESS_MASS):
    """|d(f^* alpha)| / (1 + |f^* alpha|) in the L^2-consistent (lumped) cochain norm."""
    return _closedness(pullback(f, alpha), mass)


def primitive_ratio(omega, eta, mass=CLOSEDNESS_MASS):
    """|omega| / |eta| in the L^2-consistent norm (0 for a vanishing eta).

    Raw coefficient norms are not comparable across levels: 1-cochain and
    2-cochain coefficients scale like h and h^2, so their ratio drifts like 1/h.
    """
    en = cochain_norm(eta, mass)
    return cochain_norm(omega, mass) / en if en > 0 else 0.0


def hopf_integral(omega):
    return integrate_top(cup(omega, coboundary(omega)))


def _gauge_deviation(omega, value, trials, rng):
    worst = 0.0
    if trials <= 0 or omega.degree == 0:
        return worst
    scale = float(np.sqrt(np.mean(omega.values**2))) or 1.0
    for _ in range(trials):
        beta = Cochain.random(omega.complex, omega.degree - 1, rng) * scale
        shifted = omega + coboundary(beta)
        worst = max(worst, abs(hopf_integral(shifted) - value))
    return worst


def hopf(f, alpha, tol=1e-10, budget=None, gauge_trials=3, seed=0, oracle=True):
    """HI_alpha(f) with all residuals needed to trust it."""
    if f.mesh.dim != 2 * alpha.degree - 1:
        raise ValueError(f"need a {2 * alpha.degree - 1}-sphere domain for a {alpha.degree}-form")
    eta, nbad = pullback(f, alpha, return_stats=True)
    if budget is None:
        budget = closedness_budget(f.mesh)
    res = _closedness(eta)
    if res > budget:
        raise ClosednessError(res, budget)
    omega, prim_res = solve_primitive(eta, tol=tol)
    value = hopf_integral(omega)
    gauge = _gauge_deviation(omega, value, gauge_trials, np.random.default_rng(seed))
    oracle_value = None
    if oracle and alpha.name == "s2_area_extended" and "hopf_target_rotation" in f.meta:
        oracle_value = hopf_oracle_for(f.meta["hopf_target_rotation"])
    return HopfReport(value, res, prim_res, f.mesh.max_edge_length(), gauge, oracle_value,
                      budget, nbad, f.name, primitive_ratio(omega, eta), omega, eta)


def hopf_oracle_for(rotation):
    """Linking-number oracle for Q o h: fibers over two values pulled back by Q.

    HI is quadratic in alpha, so an orientation-reversing Q leaves it unchanged.
    """
    q = np.asarray(rotation, dtype=float)
    a = q.T @ np.array([0.0, 0.0, 1.0])
    b = q.T @ np.array([0.0, 0.0, -1.0])
    return linking_oracle(a, b)


def gauge_independence_check(f, alpha, trials=10, seed=0, tol=1e-10, budget=None):
    """max over trials of |HI(omega) - HI(omega + d beta)| for random beta."""
    if trials <= 0:
        return 0.0
    rep = hopf(f, alpha, tol=tol, budget=budget, gauge_trials=0, oracle=False)
    return _gauge_deviation(rep.omega, rep.value, trials, np.random.default_rng(seed))


def restrict_to_ring(f_on_ball, r):
    """Sphere map x -> f(r x) sampled on the ring nearest to radius r."""
    cone = f_on_ball.mesh
    if not isinstance(cone, ConeComplex):
        raise TypeError("hopf_scaled needs a map on a cone mesh")
    if not 0.0 < r <= 1.0:
        raise ValueError("radius must lie in (0, 1]")
    j = int(np.clip(round(r * cone.layers), 1, cone.layers))
    if abs(cone.radius_of_ring(j) - r) > 1e-9:
        warnings.warn(f"r={r} is not on a ring; using ring radius {cone.radius_of_ring(j)}",
                      RuntimeWarning)
    sphere = sphere_from_ring(cone, j)
    vals = f_on_ball.values[cone.ring_vertices(j)]
    return SampledMap(sphere, vals, f"{f_on_ball.name}|r={cone.radius_of_ring(j):g}",
                      f_on_ball.meta)


def hopf_scaled(f_on_ball, r, alpha, **kw):
    return hopf(restrict_to_ring(f_on_ball, r), alpha, **kw)


def homotopy_sweep(family, alpha, times=None, budget=None, **kw):
    """HI along a family of maps; aborts on the first member failing the closedness gate."""
    family = list(family)
    if times is None:
        times = np.linspace(0.0, 1.0, len(family)) if len(family) > 1 else np.zeros(1)
    times = np.asarray(times, dtype=float)
    if len(times) != len(family):
        raise ValueError("one time per family member required")
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be sorted")
    reports = []
    for t, g in zip(times, family):
        try:
            reports.append(hopf(g, alpha, budget=budget, **kw))
        except ClosednessError as err:
            raise ClosednessError(err.residual, err.budget, where=float(t)) from err
    values = np.array([r.value for r in reports])
    return HomotopySweep(times, family, values, float(np.max(np.abs(values - values[0]))), reports)


def _cup_multiplicity(complex, p, q):
    """sqrt(max front multiplicity * max back multiplicity) for the cup bound."""
    from .cochain import _cup_faces
    front, back = _cup_faces(complex, p, q)
    return float(np.sqrt(np.bincount(front).max() * np.bincount(back).max()))


@dataclass
class ConvergenceRow:
    k: int
    pullback_diff: float
    hi_diff: float
    hi_value: float
    identity_gap: float
    bound: float


def convergence_experiment(g_seq, g, alpha, p=2.0, budget=None):
    """Pullback distance vs HI distance along a sequence g_k -> g.

    For every k the table reports the discrete L^p distance of the
    pullbacks, |HI(g_k) - HI(g)|, the defect of the exact cochain identity

        HI(g_k) - HI(g) = int omega_k u D + int D u omega,  D = d omega_k - d omega,

    and the Cauchy-Schwarz bound K (|omega_k| + |omega|) |D| that dominates it.
    """
    n = alpha.degree // 2
    if p < 2.0 - 1.0 / (2 * n):
        raise ValueError(f"p={p} below 2 - 1/(2n) = {2 - 1 / (2 * n)}")
    base = hopf(g, alpha, budget=budget, gauge_trials=0, oracle=False)
    w = base.omega
    dw = coboundary(w)
    kmult = _cup_multiplicity(g.mesh, w.degree, dw.degree)
    rows = []
    for k, gk in enumerate(g_seq, start=1):
        rep = hopf(gk, alpha, budget=budget, gauge_trials=0, oracle=False)
        wk = rep.omega
        diff = coboundary(wk) - dw
        split = integrate_top(cup(wk, diff)) + integrate_top(cup(diff, w))
        dhi = rep.value - base.value
        rows.append(ConvergenceRow(
            k, lp_norm(rep.eta - base.eta, p), abs(dhi), rep.value, abs(split - dhi),
            kmult * (np.linalg.norm(wk.values) + np.linalg.norm(w.values)) * np.linalg.norm(diff.values)))
    return rows


# ---------------------------------------------------------------------------
# linking-number oracle
# ---------------------------------------------------------------------------

def hopf_fiber(value, samples=512):
    """Fiber of h(z1, z2) = (2 z1 conj(z2), |z1|^2 - |z2|^2) over a point of S^2.

    Returns points (samples, 4) and their derivatives in the fiber angle.
    """
    p = np.asarray(value, dtype=float)
    p = p / np.linalg.norm(p)
    phi = 2 * np.pi * np.arange(samples) / samples
    arg = np.arctan2(p[1], p[0])
    r1 = np.sqrt(max(0.0, (1 + p[2]) / 2))
    r2 = np.sqrt(max(0.0, (1 - p[2]) / 2))
    z1 = r1 * np.exp(1j * (phi + arg))
    z2 = r2 * np.exp(1j * phi)
    pts = np.column_stack([z1.real, z1.imag, z2.real, z2.imag])
    dz1, dz2 = 1j * z1, 1j * z2
    der = np.column_stack([dz1.real, dz1.imag, dz2.real, dz2.imag])
    return pts, der


def _stereographic(pts, der, pole):
    """Orientation-preserving stereographic projection of S^3 from `pole` to R^3."""
    # orthonormal frame (pole, e1, e2, e3) with det = +1
    q, _ = np.linalg.qr(np.column_stack([pole, np.eye(4)[:, :3]]))
    q[:, 0] = pole
    if np.linalg.det(q) < 0:
        q[:, 3] = -q[:, 3]
    local = pts @ q
    dlocal = der @ q
    s = 1.0 - local[:, 0]
    x = local[:, 1:] / s[:, None]
    dx = dlocal[:, 1:] / s[:, None] + local[:, 1:] * (dlocal[:, :1] / s[:, None] ** 2)
    # without this flip the chart reverses the outward-normal-first orientation
    x[:, 0] = -x[:, 0]
    dx[:, 0] = -dx[:, 0]
    return x, dx


def linking_oracle(value_a, value_b, samples=512):
    """Linking number of the Hopf fibers over two distinct points of S^2 (Gauss integral)."""
    a = np.asarray(value_a, float)
    b = np.asarray(value_b, float)
    a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
    if np.linalg.norm(a - b) < 1e-9:
        raise ValueError("linking oracle needs two distinct values")
    pa, da = hopf_fiber(a, samples)
    pb, db = hopf_fiber(b, samples)
    # pole far from both fibers
    cand = np.vstack([np.eye(4), -np.eye(4), np.random.default_rng(7).standard_normal((64, 4))])
    cand /= np.linalg.norm(cand, axis=1)[:, None]
    allpts = np.vstack([pa, pb])
    dist = np.min(np.linalg.norm(cand[:, None, :] - allpts[None, :, :], axis=2), axis=1)
    pole = cand[np.argmax(dist)]
    xa, dxa = _stereographic(pa, da, pole)
    xb, dxb = _stereographic(pb, db, pole)
    h = (2 * np.pi / samples) ** 2
    lk = _kernels.gauss_linking_sum(xa, dxa, xb, dxb) * h / (4 * np.pi)
    nearest = int(round(lk))
    if abs(lk - nearest) > 0.1:
        raise OracleError(f"Gauss integral {lk:.4f} is not near an integer")
    return nearest
