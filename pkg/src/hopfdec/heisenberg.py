"""The Heisenberg group H_n in exponential coordinates.

Points are stored as (z, t) with z = (x_1, y_1, ..., x_n, y_n) and the group law

    (z, t) * (z', t') = (z + z', t + t' + 2 Im sum_j z_j conj(z'_j)).

The horizontal frame is X_j = d/dx_j + 2 y_j d/dt, Y_j = d/dy_j - 2 x_j d/dt,
and the contact form is alpha = dt + 2 sum_j (x_j dy_j - y_j dx_j).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

CONTACT_TOL = 1e-9
# covers the polygonal loop drawn in place of the ideal circle (relative ~2.5e-5)
PRUNE_MARGIN = 1e-3


class NonHorizontalError(ValueError):
    """Raised when a tangent vector is not in the horizontal distribution."""

    def __init__(self, residual):
        super().__init__(f"vector is not horizontal (contact residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class HeisPoint:
    z: np.ndarray
    t: float

    def __post_init__(self):
        z = np.array(self.z, dtype=float).reshape(-1)
        if z.size == 0 or z.size % 2:
            raise ValueError(f"z must hold 2n >= 2 reals, got {z.size}")
        if not (np.all(np.isfinite(z)) and np.isfinite(self.t)):
            raise ValueError("coordinates must be finite")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self):
        return self.z.size // 2

    @property
    def x(self):
        return self.z[0::2]

    @property
    def y(self):
        return self.z[1::2]

    @property
    def coords(self):
        return np.append(self.z, self.t)

    @classmethod
    def from_coords(cls, coords):
        c = np.asarray(coords, dtype=float)
        return cls(c[:-1], c[-1])

    @classmethod
    def identity(cls, n=1):
        return cls(np.zeros(2 * n), 0.0)

    def __eq__(self, other):
        return (isinstance(other, HeisPoint) and self.n == other.n
                and np.array_equal(self.coords, other.coords))

    def __hash__(self):
        return hash(self.coords.tobytes())


@dataclass(frozen=True)
class TangentVector:
    base: HeisPoint
    components: np.ndarray

    def __post_init__(self):
        c = np.array(self.components, dtype=float).reshape(-1)
        if c.size != 2 * self.base.n + 1:
            raise ValueError(
                f"expected {2 * self.base.n + 1} components, got {c.size}")
        c.setflags(write=False)
        object.__setattr__(self, "components", c)

    def __add__(self, other):
        if other.base != self.base:
            raise ValueError("cannot add tangent vectors at different points")
        return TangentVector(self.base, self.components + other.components)

    def __mul__(self, s):
        return TangentVector(self.base, s * self.components)

    __rmul__ = __mul__


@dataclass(frozen=True)
class HorizontalCurve:
    base_samples: np.ndarray
    t0: float
    t_samples: np.ndarray
    parameter_values: np.ndarray

    @property
    def n(self):
        return self.base_samples.shape[1] // 2

    @property
    def points(self):
        """Samples as an (N, 2n+1) coordinate array."""
        return np.column_stack([self.base_samples, self.t_samples])


@dataclass
class MetricReport:
    distance_upper: float
    lower_bound: float
    iterations: int
    converged: bool
    isoperimetric_bound: float = 0.0
    curve: HorizontalCurve = field(default=None, repr=False)

    @property
    def certified_lower(self):
        """Best provable lower bound: planar projection or isoperimetric."""
        return max(self.lower_bound, self.isoperimetric_bound)


def _check_same_n(p, q):
    if p.n != q.n:
        raise ValueError(f"dimension mismatch: H_{p.n} vs H_{q.n}")


def _im_pairing(z, w):
    """Im sum_j z_j conj(w_j) for z, w in interleaved real layout."""
    zx, zy = z[..., 0::2], z[..., 1::2]
    wx, wy = w[..., 0::2], w[..., 1::2]
    return np.sum(zy * wx - zx * wy, axis=-1)


def group_mul(p, q):
    _check_same_n(p, q)
    return HeisPoint(p.z + q.z, p.t + q.t + 2.0 * _im_pairing(p.z, q.z))


def group_inv(p):
    return HeisPoint(-p.z, -p.t)


def left_translation_matrix(g):
    """Constant differential of L_g : p -> g * p in coordinates."""
    n = g.n
    m = np.eye(2 * n + 1)
    # d/dz of 2 Im sum g_j conj(z_j) = 2 sum (g_y x - g_x y)
    m[-1, 0:2 * n:2] = 2.0 * g.y
    m[-1, 1:2 * n:2] = -2.0 * g.x
    return m


def frame_at(p):
    """Left-invariant frame (X_1, Y_1, ..., X_n, Y_n, T) at p."""
    n = p.n
    vecs = []
    for j in range(n):
        xv = np.zeros(2 * n + 1)
        xv[2 * j] = 1.0
        xv[-1] = 2.0 * p.y[j]
        yv = np.zeros(2 * n + 1)
        yv[2 * j + 1] = 1.0
        yv[-1] = -2.0 * p.x[j]
        vecs += [TangentVector(p, xv), TangentVector(p, yv)]
    tv = np.zeros(2 * n + 1)
    tv[-1] = 1.0
    vecs.append(TangentVector(p, tv))
    return vecs


def contact_form(p, v):
    if v.base != p:
        raise ValueError("tangent vector is not based at p")
    c = v.components
    return float(c[-1] + 2.0 * np.sum(p.x * c[1:-1:2] - p.y * c[0:-1:2]))


def horizontal_norm(p, v, tol=CONTACT_TOL):
    """Length of a horizontal vector in the metric making X_j, Y_j orthonormal.

    The frame coefficients of a horizontal vector are its dx_j, dy_j
    components, so the norm is the Euclidean norm of the planar part.
    """
    res = contact_form(p, v)
    if abs(res) > tol * max(np.linalg.norm(v.components), 1.0):
        raise NonHorizontalError(abs(res))
    return float(np.linalg.norm(v.components[:-1]))


def lift_increments(base):
    """Trapezoid increments of t' = 2 sum_j (y_j x_j' - x_j y_j') along a polyline.

    On a straight chord the contact form is constant, so these increments make
    every chord exactly horizontal.
    """
    x, y = base[:, 0::2], base[:, 1::2]
    return 2.0 * np.sum(x[1:] * y[:-1] - x[:-1] * y[1:], axis=1)


def lift_curve(base, t0=0.0, parameter_values=None):
    base = np.atleast_2d(np.asarray(base, dtype=float))
    if base.shape[0] < 2:
        raise ValueError("need at least 2 samples to lift a curve")
    if base.shape[1] % 2:
        raise ValueError("planar samples must have even dimension 2n")
    if parameter_values is None:
        parameter_values = np.arange(base.shape[0], dtype=float)
    parameter_values = np.asarray(parameter_values, dtype=float)
    if parameter_values.shape[0] != base.shape[0] or np.any(np.diff(parameter_values) <= 0):
        raise ValueError("parameter values must be strictly increasing, one per sample")
    t = t0 + np.concatenate([[0.0], np.cumsum(lift_increments(base))])
    return HorizontalCurve(base, float(t0), t, parameter_values)


def contact_residuals(curve):
    """Contact form of each chord evaluated at its midpoint."""
    pts = curve.points
    d = np.diff(pts, axis=0)
    mid = 0.5 * (pts[1:] + pts[:-1])
    mx, my = mid[:, 0:-1:2], mid[:, 1:-1:2]
    return d[:, -1] + 2.0 * np.sum(mx * d[:, 1:-1:2] - my * d[:, 0:-1:2], axis=1)


def cc_length(curve):
    pts = curve.points
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        mid = HeisPoint.from_coords(0.5 * (a + b))
        total += horizontal_norm(mid, TangentVector(mid, b - a))
    return total


# ---------------------------------------------------------------------------
# Carnot-Caratheodory distance estimate
# ---------------------------------------------------------------------------

def _path_terms(u, w, tau, k):
    """Polyline length, vertical gap tau - t_end, and their gradients in the free vertices."""
    dim = w.size
    pts = np.vstack([np.zeros(dim), u.reshape(k, dim), w])
    seg = np.diff(pts, axis=0)
    seglen = np.linalg.norm(seg, axis=1)
    unit = seg / np.maximum(seglen, 1e-300)[:, None]
    dlen = np.zeros_like(pts)
    dlen[1:] += unit
    dlen[:-1] -= unit
    # d t_end / d P_i: t_end = 2 sum_i (x_{i+1} y_i - x_i y_{i+1}) per plane
    x, y = pts[:, 0::2], pts[:, 1::2]
    dgap = np.zeros_like(pts)
    dgap[1:, 0::2] -= 2.0 * y[:-1]
    dgap[:-1, 0::2] += 2.0 * y[1:]
    dgap[:-1, 1::2] -= 2.0 * x[1:]
    dgap[1:, 1::2] += 2.0 * x[:-1]
    gap = tau - lift_increments(pts).sum()
    return seglen.sum(), dlen[1:-1].ravel(), gap, dgap[1:-1].ravel()


def _polyline_objective(u, w, tau, k, eps=1e-14):
    """Polyline length plus the circle loop closing the vertical gap, and gradient."""
    length, dlen, gap, dgap = _path_terms(u, w, tau, k)
    root = np.sqrt(gap * gap + eps * eps)
    loop = np.sqrt(np.pi * root)
    dloop = 0.5 * np.pi / loop * (gap / root) if loop > 0 else 0.0
    return length + loop, dlen + dloop * dgap


def _polish(u0, w, tau, k, max_iter):
    """Shortest polyline with no vertical gap left, started from u0 (SLSQP)."""
    cons = {"type": "eq",
            "fun": lambda u: _path_terms(u, w, tau, k)[2],
            "jac": lambda u: _path_terms(u, w, tau, k)[3]}
    return minimize(lambda u: _path_terms(u, w, tau, k)[:2], u0, jac=True, method="SLSQP",
                    constraints=[cons], options={"maxiter": max_iter, "ftol": 1e-12})


def _loop_polygon(start, area, plane, dim, sides=256):
    """Closed regular polygon through `start` enclosing signed area `area` in one plane."""
    if area == 0.0:
        return np.empty((0, dim))
    radius = np.sqrt(abs(area) / (0.5 * sides * np.sin(2 * np.pi / sides)))
    orient = np.sign(area)
    ang = orient * 2 * np.pi * np.arange(1, sides + 1) / sides
    out = np.tile(start, (sides, 1))
    # circle tangent to nothing in particular: centred at start - radius*e_x
    out[:, 2 * plane] += radius * (np.cos(ang) - 1.0)
    out[:, 2 * plane + 1] += radius * np.sin(ang)
    out[-1] = start
    return out


def _matched_arc_angle(planar, tau):
    """Half-opening angle of the arc over a chord of length `planar` whose
    circular segment has area |tau| / 4 (segment area R^2 (phi - sin phi cos phi))."""
    target = abs(tau) / planar**2
    g = lambda phi: (phi - np.sin(phi) * np.cos(phi)) / np.sin(phi) ** 2 - target
    hi = np.pi - 1e-9
    if g(hi) < 0:
        return hi
    return brentq(g, 1e-9, hi)


def _arc_starts(w, tau, k):
    """Initial interior vertices: the chord, then circular arcs from 0 to w.

    Arcs bulge both ways in the complex line through w: a half circle, and
    the arc whose segment area matches |tau| / 4.  When w = 0 the start is a
    full circle enclosing |tau| / 4.
    """
    dim = w.size
    planar = float(np.linalg.norm(w))
    frac = np.arange(1, k + 1) / (k + 1)
    starts = [np.outer(frac, w).ravel()]
    if tau == 0.0:
        return starts
    if planar > 0.0:
        e1 = w / planar
    else:
        e1 = np.zeros(dim)
        e1[0] = 1.0
    e2 = np.empty(dim)
    e2[0::2], e2[1::2] = -e1[1::2], e1[0::2]  # multiplication by i
    if planar == 0.0:
        radius = np.sqrt(abs(tau) / (4 * np.pi))
        for sign in (1.0, -1.0):
            ang = 2 * np.pi * frac
            pts = np.outer(radius * (1 - np.cos(ang)), e1) + np.outer(sign * radius * np.sin(ang), e2)
            starts.append(pts.ravel())
        return starts
    for phi in (0.5 * np.pi, _matched_arc_angle(planar, tau)):
        radius = planar / (2 * np.sin(phi))
        theta = -phi + 2 * phi * frac
        along = planar / 2 + radius * np.sin(theta)
        across = radius * (np.cos(theta) - np.cos(phi))
        for sign in (1.0, -1.0):
            starts.append((np.outer(along, e1) + np.outer(sign * across, e2)).ravel())
    return starts


def _isoperimetric_bound(planar, tau):
    """Certified lower bound on the length of a horizontal path from 0 to (w, tau).

    The planar projection runs from 0 to w and, closed by the chord, encloses
    symplectic area |tau| / 4.  Two closed curves bound its length L:
    the path plus the chord gives (L + |w|)^2 >= pi |tau|; the path followed by
    its mirror image across a Lagrangian plane containing w (an
    anti-symplectic isometry fixing 0 and w) has length 2L and area |tau| / 2,
    so 4 L^2 >= 2 pi |tau|.
    """
    root = np.sqrt(np.pi * abs(tau))
    return float(max(0.0, root - planar, root / np.sqrt(2.0)))


def cc_lower_bound(p, q):
    """Certified lower bound for d_cc(p, q): planar projection or isoperimetric."""
    _check_same_n(p, q)
    rel = group_mul(group_inv(p), q)
    planar = float(np.linalg.norm(rel.z))
    return max(planar, _isoperimetric_bound(planar, rel.t))


def start_upper_bound(p, q, interior=8):
    """Length of the best explicit start path of cc_distance (no optimization).

    Every start is a horizontal polyline closed by a circular loop, so this is
    a genuine upper bound; cc_distance only improves on it (up to the
    polygonal loop it finally draws, a relative effect below 1e-4).
    """
    _check_same_n(p, q)
    rel = group_mul(group_inv(p), q)
    w, tau = rel.z, rel.t
    if not np.any(w) and tau == 0.0:
        return 0.0
    return float(min(_polyline_objective(x0, w, tau, interior)[0]
                     for x0 in _arc_starts(w, tau, interior)))


def cc_distance(p, q, interior=8, restarts=4, seed=0, rel_tol=1e-6, max_iter=500):
    """Upper and lower bounds for d_cc(p, q).

    By left invariance the search runs from the origin to p^{-1} * q.  The
    planar path is a polyline with `interior` free vertices; the vertical
    holonomy left over is closed by a circular loop (area A costs length
    sqrt(4 pi A), and a closed loop of signed area A shifts t by -4A).
    """
    _check_same_n(p, q)
    n = p.n
    rel = group_mul(group_inv(p), q)
    w, tau = rel.z, rel.t
    planar = float(np.linalg.norm(w))
    iso = _isoperimetric_bound(planar, tau)
    if planar == 0.0 and tau == 0.0:
        return MetricReport(0.0, 0.0, 0, True, 0.0,
                            lift_curve(np.vstack([p.z, p.z]), p.t))

    rng = np.random.default_rng(seed)
    k = interior
    scale = max(planar, np.sqrt(abs(tau)), 1e-12)
    starts = _arc_starts(w, tau, k)
    starts += [starts[0] + 0.5 * scale * rng.standard_normal(starts[0].shape)
               for _ in range(max(restarts, 1) - 1)]
    best = None
    iters = 0
    converged = False
    for x0 in starts:
        res = minimize(_polyline_objective, x0, args=(w, tau, k), jac=True, method="L-BFGS-B",
                       options={"maxiter": max_iter, "ftol": rel_tol * 1e-3, "gtol": 1e-10})
        iters += res.nit
        if best is None or res.fun < best.fun:
            best = res
            converged = bool(res.success) or res.nit < max_iter
    if tau != 0.0:
        # the loop's sqrt cost is stiff near a closed gap; finish with the exact constraint
        pol = _polish(best.x, w, tau, k, max_iter)
        iters += pol.nit
        if np.all(np.isfinite(pol.x)):
            fun = _polyline_objective(pol.x, w, tau, k)[0]
            if fun < best.fun:
                best.x, best.fun = pol.x, fun
    # rebuild an explicit horizontal polyline and measure it
    pts = np.vstack([np.zeros(2 * n), best.x.reshape(k, 2 * n), w])
    gap = tau - lift_increments(pts).sum()
    loop = _loop_polygon(w, -gap / 4.0, 0, 2 * n)
    planar_path = np.vstack([pts, loop])
    # translate back to start at p: left translation by p preserves horizontality
    curve = lift_curve(planar_path, 0.0)
    coords = curve.points @ left_translation_matrix(p).T + np.append(p.z, p.t)
    curve = HorizontalCurve(coords[:, :-1], p.t, coords[:, -1], curve.parameter_values)
    upper = cc_length(curve)
    return MetricReport(upper, planar, iters, converged, iso, curve)


def euclidean_distance(p, q):
    return float(np.linalg.norm(p.coords - q.coords))


def metric_comparison_check(sample_pairs, prune=True, **cc_kwargs):
    """Empirical constants (C_lower, C_upper) of C^-1|p-q| <= d_cc <= C|p-q|^(1/2).

    The left inequality uses the certified lower bound, the right one the
    optimizer's upper bound.  Coincident pairs contribute nothing.

    Both constants are maxima over the sample.  With `prune`, pairs are
    visited in decreasing order of their start-path ratio and the optimizer
    stops once no remaining start path could raise C_upper; the optimizer
    never lengthens its best start, so the result is unchanged.
    """
    pairs = list(sample_pairs)
    if not pairs:
        raise ValueError("empty sample set")
    interior = cc_kwargs.get("interior", 8)
    c_lower = 0.0
    candidates = []
    for p, q in pairs:
        e = euclidean_distance(p, q)
        if e == 0.0:
            continue
        c_lower = max(c_lower, e / cc_lower_bound(p, q))
        ratio = start_upper_bound(p, q, interior) / np.sqrt(e) if prune else np.inf
        candidates.append((ratio, e, p, q))
    candidates.sort(key=lambda item: -item[0])
    c_upper = 0.0
    for ratio, e, p, q in candidates:
        if ratio * (1.0 + PRUNE_MARGIN) <= c_upper:
            break
        rep = cc_distance(p, q, **cc_kwargs)
        c_upper = max(c_upper, rep.distance_upper / np.sqrt(e))
    return float(c_lower), float(c_upper)
