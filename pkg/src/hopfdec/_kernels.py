"""Hot per-simplex and per-node kernels.

Each kernel has a numba ``@njit`` version and a pure-numpy version with the
same signature.  The numba path is used when numba imports cleanly and the
environment variable ``HOPFDEC_DISABLE_NUMBA`` is unset (or ``0``).
"""

import math
import os

import numpy as np

try:
    import numba
    from numba import njit, prange

    NUMBA_AVAILABLE = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        numba.config.THREADING_LAYER = "workqueue"
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    NUMBA_AVAILABLE = False


def _numba_requested():
    flag = os.environ.get("HOPFDEC_DISABLE_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


USE_NUMBA = NUMBA_AVAILABLE and _numba_requested()


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def set_threads(n):
    """Set the numba thread count (no-op on the numpy path)."""
    if NUMBA_AVAILABLE and n:
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))


# ---------------------------------------------------------------------------
# radial cutoff used by the extended S^2 area form
# ---------------------------------------------------------------------------

def _smoothstep_np(x):
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0.0, np.exp(-1.0 / np.where(x > 0.0, x, 1.0)), 0.0)
        b = np.where(x < 1.0, np.exp(-1.0 / np.where(x < 1.0, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def radial_cutoff_np(r, inner, outer, width):
    """C-infinity bump: 1 on [inner, outer], 0 outside [inner-width, outer+width]."""
    return _smoothstep_np((r - (inner - width)) / width) * (
        1.0 - _smoothstep_np((r - outer) / width))


def _s2_pullback_np(points, tris, qpts, qwts, inner, outer, width):
    a = points[tris[:, 0]]
    e1 = points[tris[:, 1]] - a
    e2 = points[tris[:, 2]] - a
    cr = np.cross(e1, e2)
    out = np.zeros(len(tris))
    for (u, v), w in zip(qpts, qwts):
        y = a + u * e1 + v * e2
        r = np.linalg.norm(y, axis=1)
        chi = radial_cutoff_np(r, inner, outer, width)
        safe = np.where(r > 0.0, r, 1.0)
        out += w * np.where(chi > 0.0, chi * np.einsum("ij,ij->i", y, cr) / safe**3, 0.0)
    return out / (4.0 * np.pi)


def _gauss_linking_np(r1, dr1, r2, dr2):
    diff = r1[:, None, :] - r2[None, :, :]
    cross = np.cross(dr1[:, None, :], dr2[None, :, :])
    num = np.einsum("ijk,ijk->ij", diff, cross)
    den = np.linalg.norm(diff, axis=2) ** 3
    return float(np.sum(num / den))


def _affine_jacobians_np(coords, simplices, values):
    """Per-simplex differential in an orthonormal tangent frame.

    Returns (jac, qual, vol): jac has shape (S, m, d) and maps intrinsic
    tangent coordinates to value increments; qual is the smallest diagonal
    entry of the edge-matrix R factor (zero for collapsed simplices).
    """
    d = simplices.shape[1] - 1
    edges = coords[simplices[:, 1:]] - coords[simplices[:, :1]]          # (S, d, N)
    dvals = values[simplices[:, 1:]] - values[simplices[:, :1]]          # (S, d, m)
    q, r = np.linalg.qr(np.transpose(edges, (0, 2, 1)))                  # E^T = Q R
    diag = np.abs(np.diagonal(r, axis1=1, axis2=2))
    qual = diag.min(axis=1) if d > 0 else np.ones(len(simplices))
    vol = np.prod(diag, axis=1) / math.factorial(d)
    ok = qual > 1e-14
    jac = np.zeros((len(simplices), values.shape[1], d))
    if np.any(ok):
        # D = R^T J^T  ->  J^T = R^{-T} D
        jt = np.linalg.solve(np.transpose(r[ok], (0, 2, 1)), dvals[ok])
        jac[ok] = np.transpose(jt, (0, 2, 1))
    return jac, qual, vol


if NUMBA_AVAILABLE:

    @njit(cache=True)
    def _smoothstep_nb(x):
        if x <= 0.0:
            return 0.0
        if x >= 1.0:
            return 1.0
        a = math.exp(-1.0 / x)
        b = math.exp(-1.0 / (1.0 - x))
        return a / (a + b)

    @njit(cache=True)
    def _cutoff_nb(r, inner, outer, width):
        return _smoothstep_nb((r - (inner - width)) / width) * (
            1.0 - _smoothstep_nb((r - outer) / width))

    @njit(parallel=True, cache=True)
    def _s2_pullback_nb(points, tris, qpts, qwts, inner, outer, width):
        n = tris.shape[0]
        out = np.zeros(n)
        for i in prange(n):
            a0 = points[tris[i, 0], 0]
            a1 = points[tris[i, 0], 1]
            a2 = points[tris[i, 0], 2]
            e10 = points[tris[i, 1], 0] - a0
            e11 = points[tris[i, 1], 1] - a1
            e12 = points[tris[i, 1], 2] - a2
            e20 = points[tris[i, 2], 0] - a0
            e21 = points[tris[i, 2], 1] - a1
            e22 = points[tris[i, 2], 2] - a2
            c0 = e11 * e22 - e12 * e21
            c1 = e12 * e20 - e10 * e22
            c2 = e10 * e21 - e11 * e20
            acc = 0.0
            for q in range(qwts.shape[0]):
                u = qpts[q, 0]
                v = qpts[q, 1]
                y0 = a0 + u * e10 + v * e20
                y1 = a1 + u * e11 + v * e21
                y2 = a2 + u * e12 + v * e22
                r = math.sqrt(y0 * y0 + y1 * y1 + y2 * y2)
                chi = _cutoff_nb(r, inner, outer, width)
                if chi > 0.0:
                    acc += qwts[q] * chi * (y0 * c0 + y1 * c1 + y2 * c2) / (r * r * r)
            out[i] = acc / (4.0 * math.pi)
        return out

    @njit(parallel=True, cache=True)
    def _gauss_linking_nb(r1, dr1, r2, dr2):
        n1 = r1.shape[0]
        n2 = r2.shape[0]
        partial = np.zeros(n1)
        for i in prange(n1):
            s = 0.0
            for j in range(n2):
                x = r1[i, 0] - r2[j, 0]
                y = r1[i, 1] - r2[j, 1]
                z = r1[i, 2] - r2[j, 2]
                cx = dr1[i, 1] * dr2[j, 2] - dr1[i, 2] * dr2[j, 1]
                cy = dr1[i, 2] * dr2[j, 0] - dr1[i, 0] * dr2[j, 2]
                cz = dr1[i, 0] * dr2[j, 1] - dr1[i, 1] * dr2[j, 0]
                dist = math.sqrt(x * x + y * y + z * z)
                s += (x * cx + y * cy + z * cz) / (dist * dist * dist)
            partial[i] = s
        return partial.sum()

    @njit(parallel=True, cache=True)
    def _affine_jacobians_nb(coords, simplices, values):
        ns = simplices.shape[0]
        d = simplices.shape[1] - 1
        amb = coords.shape[1]
        m = values.shape[1]
        jac = np.zeros((ns, m, d))
        qual = np.zeros(ns)
        vol = np.zeros(ns)
        fact = 1.0
        for k in range(2, d + 1):
            fact *= k
        for s in prange(ns):
            # modified Gram-Schmidt on the edge vectors: E^T = Q R
            q = np.zeros((amb, d))
            r = np.zeros((d, d))
            for k in range(d):
                for a in range(amb):
                    q[a, k] = coords[simplices[s, k + 1], a] - coords[simplices[s, 0], a]
                for j in range(k):
                    dot = 0.0
                    for a in range(amb):
                        dot += q[a, j] * q[a, k]
                    r[j, k] = dot
                    for a in range(amb):
                        q[a, k] -= dot * q[a, j]
                nrm = 0.0
                for a in range(amb):
                    nrm += q[a, k] * q[a, k]
                nrm = math.sqrt(nrm)
                r[k, k] = nrm
                if nrm > 0.0:
                    for a in range(amb):
                        q[a, k] /= nrm
            mn = 1.0 if d == 0 else np.inf
            pv = 1.0
            for k in range(d):
                mn = min(mn, r[k, k])
                pv *= r[k, k]
            qual[s] = mn
            vol[s] = pv / fact
            if mn <= 1e-14:
                continue
            # forward substitution: R^T X = D, X = J^T (d x m)
            for c in range(m):
                for k in range(d):
                    acc = values[simplices[s, k + 1], c] - values[simplices[s, 0], c]
                    for j in range(k):
                        acc -= r[j, k] * jac[s, c, j]
                    jac[s, c, k] = acc / r[k, k]
        return jac, qual, vol


def s2_pullback(points, tris, qpts, qwts, inner, outer, width):
    points = np.ascontiguousarray(points, dtype=np.float64)
    tris = np.ascontiguousarray(tris, dtype=np.int64)
    qpts = np.ascontiguousarray(qpts, dtype=np.float64)
    qwts = np.ascontiguousarray(qwts, dtype=np.float64)
    if USE_NUMBA:
        return _s2_pullback_nb(points, tris, qpts, qwts, inner, outer, width)
    return _s2_pullback_np(points, tris, qpts, qwts, inner, outer, width)


def gauss_linking_sum(r1, dr1, r2, dr2):
    """Unnormalized double sum of (r1-r2).(dr1 x dr2)/|r1-r2|^3."""
    args = [np.ascontiguousarray(a, dtype=np.float64) for a in (r1, dr1, r2, dr2)]
    if USE_NUMBA:
        return float(_gauss_linking_nb(*args))
    return _gauss_linking_np(*args)


def affine_jacobians(coords, simplices, values):
    coords = np.ascontiguousarray(coords, dtype=np.float64)
    simplices = np.ascontiguousarray(simplices, dtype=np.int64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    if USE_NUMBA:
        return _affine_jacobians_nb(coords, simplices, values)
    return _affine_jacobians_np(coords, simplices, values)
