"""Builtin maps and the rank / contact analyzers for sampled maps.

Maps into H_n use the coordinate layout (x_1, y_1, ..., x_n, y_n, t).
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .complex import ConeComplex, build_circle_mesh
from .heisenberg import HeisPoint, contact_residuals, group_inv, group_mul, lift_curve
from .hopf import SampledMap


class NonHorizontalMapError(ValueError):
    pass


class NotInjectiveError(ValueError):
    pass


@dataclass
class MapSpec:
    name: str
    parameters: dict = field(default_factory=dict)
    codomain_dim: int = 3


@dataclass
class RankProfile:
    per_simplex_singular_values: np.ndarray
    ranks: np.ndarray
    histogram: np.ndarray
    fractions: np.ndarray
    tol_relative: float
    excluded: int = 0

    def fraction_above(self, r):
        """Volume fraction of simplices with numerical rank > r."""
        return float(self.fractions[r + 1:].sum())

    def fraction_at_most(self, r):
        return float(self.fractions[:r + 1].sum())


@dataclass
class ContactReport:
    per_simplex_residual: np.ndarray
    max_residual: float
    mean_residual: float
    horizontal_energy: float


@dataclass
class SymplecticReport:
    pullback_norm: np.ndarray
    ranks: np.ndarray
    violators: np.ndarray
    max_rank_when_isotropic: int


@dataclass
class CenterReport:
    qualifying_vertices: np.ndarray
    qualifying_simplices: np.ndarray
    differential_gaps: np.ndarray
    horizontal_gaps: np.ndarray


# ---------------------------------------------------------------------------
# builtin maps
# ---------------------------------------------------------------------------

def hopf_values(points):
    """h(z1, z2) = (2 z1 conj(z2), |z1|^2 - |z2|^2) with z1 = x1 + i x2, z2 = x3 + i x4."""
    z1 = points[:, 0] + 1j * points[:, 1]
    z2 = points[:, 2] + 1j * points[:, 3]
    w = 2 * z1 * np.conj(z2)
    return np.column_stack([w.real, w.imag, np.abs(z1) ** 2 - np.abs(z2) ** 2])


def hopf_jacobian(points):
    """Jacobian (N, 3, 4) of the quadratic extension of h to R^4."""
    x1, x2, x3, x4 = points.T
    return 2.0 * np.stack([
        np.column_stack([x3, x4, x1, x2]),
        np.column_stack([-x4, x3, x2, -x1]),
        np.column_stack([x1, x2, -x3, -x4]),
    ], axis=1)


def hopf_exact_differential(mesh, domain_rotation=None):
    """Differential of h o Q o pi on each chordal simplex, at its barycenter.

    pi is the radial projection of the simplex onto S^3, so the chain rule
    gives dh(p) (I - p p^T) / |c| restricted to the simplex plane, with c the
    barycenter and p = c / |c|.  dh(p) kills the fiber direction i p, which
    lies in the tangent space of S^3, so the result has rank <= 2.
    """
    top = mesh.simplices[mesh.dim]
    v = mesh.vertices[top]
    frame, _ = np.linalg.qr(np.transpose(v[:, 1:] - v[:, :1], (0, 2, 1)))   # (S, 4, 3)
    c = v.mean(axis=1)
    rc = np.linalg.norm(c, axis=1)
    p = c / rc[:, None]
    proj = (np.eye(4)[None] - p[:, :, None] * p[:, None, :]) / rc[:, None, None]
    if domain_rotation is None:
        dh = hopf_jacobian(p)
    else:
        q = np.asarray(domain_rotation, float)
        dh = hopf_jacobian(p @ q.T) @ q
    return dh @ proj @ frame


def hopf_fibration_map(mesh):
    if mesh.vertices.shape[1] != 4:
        raise ValueError("Hopf fibration needs vertices of S^3 in R^4")
    return SampledMap(mesh, hopf_values(mesh.vertices), "hopf",
                      {"hopf_target_rotation": np.eye(3).tolist()},
                      differential=hopf_exact_differential(mesh))


def z_rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def compose_orthogonal(f, q, name=None):
    """Q o f for an orthogonal 3x3 matrix Q; keeps the Hopf oracle metadata in sync."""
    q = np.asarray(q, float)
    meta = dict(f.meta)
    if "hopf_target_rotation" in meta:
        meta["hopf_target_rotation"] = (q @ np.asarray(meta["hopf_target_rotation"])).tolist()
    diff = q @ f.per_simplex_differential if f.has_exact_differential else None
    return f.with_values(f.values @ q.T, name or f"Q*{f.name}", meta, diff)


def rotation_homotopy(f, steps):
    """f_t = R_{t pi} o f on a uniform grid of t in [0, 1] (R about the z-axis)."""
    norms = np.linalg.norm(f.values, axis=1)
    if np.max(np.abs(norms - 1.0)) > 1e-9:
        raise ValueError("rotation homotopy needs values on S^2")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    times = np.linspace(0.0, 1.0, steps) if steps > 1 else np.zeros(1)
    return [compose_orthogonal(f, z_rotation(np.pi * t), f"R({t:g})*{f.name}") for t in times]


def domain_rotation(angle, plane=(0, 3), dim=4):
    q = np.eye(dim)
    i, j = plane
    c, s = np.cos(angle), np.sin(angle)
    q[i, i], q[i, j], q[j, i], q[j, j] = c, -s, s, c
    return q


def precompose_rotation(mesh, angle, plane=(0, 3)):
    """h o Q_angle: Hopf map after a rotation of S^3 in a coordinate plane."""
    q = domain_rotation(angle, plane, mesh.vertices.shape[1])
    return SampledMap(mesh, hopf_values(mesh.vertices @ q.T), f"hopf*Q({angle:g})",
                      differential=hopf_exact_differential(mesh, q))


def constant_map(mesh, value=(0.0, 0.0, 1.0)):
    value = np.asarray(value, float)
    return SampledMap(mesh, np.tile(value, (mesh.count(0), 1)), "constant")


def linear_map(mesh, matrix, name="linear"):
    return SampledMap(mesh, mesh.vertices @ np.asarray(matrix, float).T, name)


def random_linear_map(mesh, seed=0, codomain_dim=3, radius=1.5):
    """Full-rank linear map R^4 -> R^3 scaled to operator norm `radius`.

    The image of S^3 is a solid ellipsoid.  The default radius matches the
    support radius of the extended S^2 form, so the image sweeps through the
    cutoff shells where d(alpha) != 0 and the rank-3 pieces become visible
    to the closedness gate.
    """
    a = np.random.default_rng(seed).standard_normal((codomain_dim, mesh.vertices.shape[1]))
    return linear_map(mesh, radius * a / np.linalg.norm(a, 2), "random_linear")


def identity_map(mesh):
    return SampledMap(mesh, mesh.vertices.copy(), "identity")


def gerono_base(s):
    return np.column_stack([np.sin(s), np.sin(s) * np.cos(s)])


def figure_eight_embedding(samples):
    """Horizontal lift of the Gerono lemniscate (sin s, sin s cos s), s in [0, 2 pi], t(0) = 0.

    The two lobes enclose opposite signed areas, so the lift closes up, and at
    the planar double point (s = 0 vs s = pi) the heights differ by 4 x lobe area.
    """
    if samples < 8:
        raise ValueError("need at least 8 samples")
    s = np.linspace(0.0, 2 * np.pi, samples)
    return lift_curve(gerono_base(s), 0.0, s)


def curve_as_map(curve, closed=True):
    """Sample a (closed) horizontal curve on a circle mesh, one vertex per sample."""
    pts = curve.points[:-1] if closed else curve.points
    mesh = build_circle_mesh(len(pts))
    return SampledMap(mesh, pts, "curve")


def radial_extension(boundary_map, cone):
    """F(x) = f0(x/|x|) on a cone mesh; the apex takes f0 at base vertex 0."""
    if not isinstance(cone, ConeComplex) or cone.base is not boundary_map.mesh:
        if not (isinstance(cone, ConeComplex) and cone.base.count(0) == boundary_map.mesh.count(0)
                and np.allclose(cone.base.vertices, boundary_map.mesh.vertices)):
            raise ValueError("cone base does not match the boundary map's mesh")
    base_idx = cone.radial_vertex_base.copy()
    base_idx[0] = 0
    return SampledMap(cone, boundary_map.values[base_idx], f"radial({boundary_map.name})",
                      boundary_map.meta, singular_vertices=[0])


def sphere2_embedding_into_H2(mesh, values, contact_tol=None, injectivity_tol=1e-9):
    """Validate user-supplied values of a map S^2 -> H_2 (coordinates in R^5).

    Accepts the map when the discrete contact equation holds to `contact_tol`
    (default: 2 x max edge length) and no two vertices share a value.
    """
    f = SampledMap(mesh, values, "S2->H2")
    if f.codomain_dim != 5:
        raise ValueError("H_2 coordinates need 5 components")
    dists = _min_pairwise_distance(f.values)
    if dists <= injectivity_tol:
        raise NotInjectiveError(f"two vertices map to the same point (gap {dists:.2e})")
    rep = contact_check(f)
    tol = 2.0 * mesh.max_edge_length() if contact_tol is None else contact_tol
    if rep.max_residual > tol:
        raise NonHorizontalMapError(
            f"contact residual {rep.max_residual:.3e} exceeds tolerance {tol:.3e}")
    return f, rep


def _min_pairwise_distance(points):
    from scipy.spatial import cKDTree

    d, _ = cKDTree(points).query(points, k=2)
    return float(d[:, 1].min())


# ---------------------------------------------------------------------------
# analyzers
# ---------------------------------------------------------------------------

def rank_profile(f, tol_relative=0.05):
    """Numerical rank of each per-simplex differential, weighted by simplex volume."""
    jac = f.per_simplex_differential
    sv = np.linalg.svd(jac, compute_uv=False)
    ok = f.regular_mask
    lead = sv[:, :1] if sv.shape[1] else np.zeros((len(sv), 1))
    ranks = np.sum((sv > tol_relative * lead) & (sv > 0), axis=1)
    vol = f.simplex_volume
    max_rank = min(jac.shape[1], jac.shape[2])
    hist = np.bincount(ranks[ok], minlength=max_rank + 1)
    weights = np.bincount(ranks[ok], weights=vol[ok], minlength=max_rank + 1)
    total = weights.sum()
    fractions = weights / total if total > 0 else weights
    return RankProfile(sv, ranks, hist, fractions, tol_relative, int((~ok).sum()))


def _split_heisenberg(jac):
    """Rows of dF as (grad x_j, grad y_j, grad t)."""
    return jac[:, 0:-1:2, :], jac[:, 1:-1:2, :], jac[:, -1, :]


def contact_check(f, p=2.0):
    """Per-simplex violation of dt + 2 sum (x_j dy_j - y_j dx_j) = 0."""
    if f.codomain_dim % 2 != 1:
        raise ValueError("H_n coordinates have odd dimension 2n+1")
    mesh = f.mesh
    top = mesh.simplices[mesh.dim]
    jac = f.per_simplex_differential
    avg = f.values[top].mean(axis=1)
    xbar, ybar = avg[:, 0:-1:2], avg[:, 1:-1:2]
    gx, gy, gt = _split_heisenberg(jac)
    viol = gt + 2.0 * (np.einsum("sj,sjd->sd", xbar, gy) - np.einsum("sj,sjd->sd", ybar, gx))
    res = np.linalg.norm(viol, axis=1)
    ok = f.regular_mask
    res = np.where(ok, res, 0.0)
    horiz = np.linalg.norm(jac[:, :-1, :], axis=(1, 2))
    energy = float(np.sum((horiz**p * f.simplex_volume)[ok]))
    return ContactReport(res, float(res.max(initial=0.0)), float(res[ok].mean()) if ok.any() else 0.0,
                         energy)


def symplectic_rank_check(F, tol=1e-8, rank_tol=0.05):
    """Pullback of sum dx_j^dy_j under each affine piece, with the numerical rank.

    An isotropic differential (F^* omega = 0) has rank <= n; simplices with
    small pullback but larger rank are reported as violators.
    """
    if F.codomain_dim % 2:
        raise ValueError("symplectic check needs an even-dimensional codomain")
    n = F.codomain_dim // 2
    jac = F.per_simplex_differential
    gx, gy = jac[:, 0::2, :], jac[:, 1::2, :]
    # matrix of F^* omega on the simplex tangent space
    s = np.einsum("sja,sjb->sab", gx, gy) - np.einsum("sja,sjb->sab", gy, gx)
    pull = np.linalg.norm(s, axis=(1, 2))
    scale = np.linalg.norm(jac, axis=(1, 2)) ** 2
    prof = rank_profile(F, rank_tol)
    iso = pull <= tol * np.maximum(scale, 1e-300)
    iso |= scale == 0
    violators = np.nonzero(iso & (prof.ranks > n) & F.regular_mask)[0]
    max_rank = int(prof.ranks[iso].max(initial=0))
    return SymplecticReport(pull, prof.ranks, violators, max_rank)


def center_difference_check(f, g, tol=1e-9):
    """Where g^{-1} * f lies near the center Z = {z = 0}, compare the differentials."""
    if f.mesh is not g.mesh or f.codomain_dim != g.codomain_dim:
        raise ValueError("maps must share mesh and target")
    gi = np.array([group_mul(group_inv(HeisPoint.from_coords(b)), HeisPoint.from_coords(a)).coords
                   for a, b in zip(f.values, g.values)])
    qual_v = np.linalg.norm(gi[:, :-1], axis=1) <= tol
    top = f.mesh.simplices[f.mesh.dim]
    qual_s = np.nonzero(np.all(qual_v[top], axis=1))[0]
    # affine differentials share one frame per simplex, so they can be subtracted
    diff = f.affine_differential[qual_s] - g.affine_differential[qual_s]
    gaps = np.linalg.norm(diff, axis=(1, 2))
    hgaps = np.linalg.norm(diff[:, :-1, :], axis=(1, 2))
    return CenterReport(np.nonzero(qual_v)[0], qual_s, gaps, hgaps)


# ---------------------------------------------------------------------------
# registry and tabulated maps
# ---------------------------------------------------------------------------

def resolve_map(spec, mesh, seed=0):
    """Build a SampledMap from a MapSpec (or name) on the given mesh."""
    if isinstance(spec, str):
        spec = MapSpec(spec)
    p = spec.parameters
    name = spec.name
    if name == "hopf":
        return hopf_fibration_map(mesh)
    if name == "hopf_rotated":
        return compose_orthogonal(hopf_fibration_map(mesh), z_rotation(float(p.get("angle", 0.0))),
                                  "hopf_rotated")
    if name == "hopf_reflected":
        return compose_orthogonal(hopf_fibration_map(mesh), np.diag([1.0, 1.0, -1.0]), "hopf_reflected")
    if name == "hopf_precomposed":
        return precompose_rotation(mesh, float(p.get("angle", 0.0)), tuple(p.get("plane", (0, 3))))
    if name == "constant":
        return constant_map(mesh, p.get("value", (0.0, 0.0, 1.0)))
    if name == "random_linear":
        return random_linear_map(mesh, int(p.get("seed", seed)), radius=float(p.get("radius", 1.5)))
    if name == "identity":
        return identity_map(mesh)
    if name == "tabulated":
        return load_tabulated_map(p["path"], mesh)
    raise KeyError(f"unknown map {name!r}")


BUILTIN_MAPS = ("hopf", "hopf_rotated", "hopf_reflected", "hopf_precomposed", "constant",
                "random_linear", "identity", "tabulated")


def save_tabulated_map(f, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex_index"] + [f"v{i + 1}" for i in range(f.codomain_dim)])
        for i, row in enumerate(f.values):
            w.writerow([i] + [repr(float(x)) for x in row])


def load_tabulated_map(path, mesh):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].startswith("#"):
                continue
            try:
                idx = int(rec[0])
            except ValueError:
                continue  # header
            rows.append((idx, [float(x) for x in rec[1:]]))
    if not rows:
        raise ValueError(f"no rows in {path}")
    rows.sort()
    idx = np.array([r[0] for r in rows])
    if not np.array_equal(idx, np.arange(mesh.count(0))):
        raise ValueError("tabulated map must list every vertex exactly once")
    return SampledMap(mesh, np.array([r[1] for r in rows]), "tabulated")


def lobe_area(samples=20001):
    """Signed area of the first Gerono lobe (s in [0, pi]) by the shoelace formula."""
    s = np.linspace(0.0, np.pi, samples)
    b = gerono_base(s)
    return 0.5 * float(np.sum(b[:-1, 0] * b[1:, 1] - b[1:, 0] * b[:-1, 1]))


def figure_eight_contact_residual(curve):
    return float(np.max(np.abs(contact_residuals(curve))))
