"""Cochains on ordered simplicial complexes.

Coboundary is the transpose of signed incidence, the wedge is the
Alexander-Whitney cup product (front face / back face in the global vertex
order) and integration sums top values weighted by the manifold orientation.
The primitive and Hodge solvers work in the Euclidean cochain inner product
unless a mass matrix is requested.
"""

import json
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, lsqr, minres, splu


class PrimitiveError(RuntimeError):
    """Least-squares primitive did not reach tolerance; carries the best iterate."""

    def __init__(self, message, omega, residual):
        super().__init__(message)
        self.omega = omega
        self.residual = residual


class HodgeError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Cochain:
    degree: int
    values: np.ndarray
    complex: object

    def __post_init__(self):
        if not 0 <= self.degree <= self.complex.dim:
            raise ValueError(f"degree {self.degree} outside 0..{self.complex.dim}")
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.complex.count(self.degree):
            raise ValueError(
                f"{v.size} values for {self.complex.count(self.degree)} {self.degree}-simplices")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, complex, degree):
        return cls(degree, np.zeros(complex.count(degree)), complex)

    @classmethod
    def random(cls, complex, degree, rng):
        return cls(degree, rng.standard_normal(complex.count(degree)), complex)

    def _same(self, other):
        if other.complex is not self.complex or other.degree != self.degree:
            raise ValueError("cochains live on different complexes or degrees")

    def __add__(self, other):
        self._same(other)
        return Cochain(self.degree, self.values + other.values, self.complex)

    def __sub__(self, other):
        self._same(other)
        return Cochain(self.degree, self.values - other.values, self.complex)

    def __mul__(self, s):
        return Cochain(self.degree, s * self.values, self.complex)

    __rmul__ = __mul__

    def __neg__(self):
        return Cochain(self.degree, -self.values, self.complex)

    def norm(self, mass="identity"):
        return cochain_norm(self, mass)

    def to_dict(self):
        return {"degree": int(self.degree), "values": self.values.tolist()}


def cochain_from_dict(data, complex):
    return Cochain(int(data["degree"]), np.asarray(data["values"], float), complex)


def dump_cochain(c, path):
    with open(path, "w") as fh:
        json.dump(c.to_dict(), fh)


def load_cochain(path, complex):
    with open(path) as fh:
        return cochain_from_dict(json.load(fh), complex)


def coboundary(c):
    if c.degree >= c.complex.dim:
        raise ValueError("coboundary of a top-degree cochain is undefined")
    return Cochain(c.degree + 1, c.complex.boundary_matrix(c.degree) @ c.values, c.complex)


def _cup_faces(complex, p, q):
    key = ("cup", p, q)
    if key not in complex._keys:
        s = complex.simplices[p + q]
        front = complex.index_of(p, s[:, :p + 1])
        back = complex.index_of(q, s[:, p:])
        complex._keys[key] = (front, back)
    return complex._keys[key]


def cup(a, b):
    """Alexander-Whitney cup product: (a u b)[v0..v_{p+q}] = a[v0..vp] * b[vp..v_{p+q}]."""
    if a.complex is not b.complex:
        raise ValueError("cochains live on different complexes")
    p, q = a.degree, b.degree
    if p + q > a.complex.dim:
        raise ValueError(f"cup degree {p + q} exceeds complex dimension {a.complex.dim}")
    front, back = _cup_faces(a.complex, p, q)
    return Cochain(p + q, a.values[front] * b.values[back], a.complex)


def cup_symmetric(a, b):
    """Average of a u b and (-1)^{pq} b u a."""
    p, q = a.degree, b.degree
    return 0.5 * (cup(a, b) + (-1) ** (p * q) * cup(b, a))


def integrate_top(c):
    if c.degree != c.complex.dim:
        raise ValueError(f"can only integrate degree-{c.complex.dim} cochains")
    return float(np.dot(c.complex.orientation, c.values))


# ---------------------------------------------------------------------------
# inner products
# ---------------------------------------------------------------------------

def _star_share(complex, k):
    """Top volume assigned to each k-simplex: sum over cofaces of |T| / C(d+1, k+1)."""
    d = complex.dim
    top = complex.simplices[d]
    vol = complex.simplex_volumes(d)
    share = np.zeros(complex.count(k))
    w = vol / math.comb(d + 1, k + 1)
    for c in combinations(range(d + 1), k + 1):
        np.add.at(share, complex.index_of(k, top[:, list(c)]), w)
    return share


def _barycentric_gram(edges):
    """Gram matrices <grad l_a, grad l_b> of barycentric coordinates, shape (S, d+1, d+1)."""
    d = edges.shape[1]
    g = np.einsum("nij,nkj->nik", edges, edges)
    ginv = np.linalg.inv(g)
    p = np.hstack([-np.ones((d, 1)), np.eye(d)])
    return np.einsum("ai,nij,jb->nab", p.T, ginv, p)


def whitney_mass(complex, k):
    """Mass matrix of lowest-order Whitney k-forms, assembled per top simplex."""
    d = complex.dim
    top = complex.simplices[d]
    v = complex.vertices
    edges = v[top[:, 1:]] - v[top[:, :1]]
    vol = complex.simplex_volumes(d)
    gram = _barycentric_gram(edges)
    local = list(combinations(range(d + 1), k + 1))
    nl = len(local)
    # integral of lambda_a lambda_b over a d-simplex
    lam = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
    mloc = np.zeros((len(top), nl, nl))
    for s_i, s in enumerate(local):
        for t_i, t in enumerate(local):
            acc = np.zeros(len(top))
            for i in range(k + 1):
                rest_s = s[:i] + s[i + 1:]
                for j in range(k + 1):
                    rest_t = t[:j] + t[j + 1:]
                    if k == 0:
                        det = np.ones(len(top))
                    else:
                        det = np.linalg.det(gram[:, list(rest_s)][:, :, list(rest_t)])
                    acc += (-1) ** (i + j) * lam[s[i], t[j]] * det
            mloc[:, s_i, t_i] = math.factorial(k) ** 2 * vol * acc
    glob = np.stack([complex.index_of(k, top[:, list(c)]) for c in local], axis=1)
    rows = np.repeat(glob, nl, axis=1).ravel()
    cols = np.tile(glob, (1, nl)).ravel()
    n = complex.count(k)
    return sp.csr_matrix((mloc.ravel(), (rows, cols)), shape=(n, n))


def mass_matrix(complex, k, kind="identity"):
    """Cochain inner product on degree k: 'identity', 'lumped' (diagonal L^2) or 'whitney'."""
    key = ("mass", k, kind)
    if key in complex._keys:
        return complex._keys[key]
    n = complex.count(k)
    if kind == "identity":
        m = sp.identity(n, format="csr")
    elif kind == "lumped":
        vol = complex.simplex_volumes(k)
        m = sp.diags(_star_share(complex, k) / vol**2, format="csr")
    elif kind == "whitney":
        m = whitney_mass(complex, k)
    else:
        raise ValueError(f"unknown mass matrix {kind!r}")
    complex._keys[key] = m
    return m


def cochain_norm(c, mass="identity"):
    if mass == "identity":
        return float(np.linalg.norm(c.values))
    m = mass_matrix(c.complex, c.degree, mass)
    return float(np.sqrt(max(c.values @ (m @ c.values), 0.0)))


def lp_norm(c, p=2.0):
    """(sum |c_s|^p vol(s))^(1/p) with affine simplex volumes."""
    vol = c.complex.simplex_volumes(c.degree)
    return float(np.sum(np.abs(c.values) ** p * vol) ** (1.0 / p))


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------

def solve_primitive(eta, tol=1e-10, max_iter=None, closedness_budget=None):
    """Minimal-norm least-squares primitive: omega minimizing |d omega - eta|.

    Returns (omega, residual) with residual = |d omega - eta| / |eta|, which
    measures how far eta is from the image of d.  Iteration stops when the
    normal-equation residual drops below `tol` relative; if the cap is hit
    first a PrimitiveError carries the best omega.
    """
    if eta.degree < 1:
        raise ValueError("primitives exist only for degree >= 1")
    cx = eta.complex
    if closedness_budget is not None and eta.degree < cx.dim:
        dn = np.linalg.norm(coboundary(eta).values)
        rel = dn / (1.0 + np.linalg.norm(eta.values))
        if rel > closedness_budget:
            raise ValueError(f"eta is not closed: relative |d eta| = {rel:.3e}")
    d = cx.boundary_matrix(eta.degree - 1)
    enorm = np.linalg.norm(eta.values)
    if enorm == 0.0:
        return Cochain.zeros(cx, eta.degree - 1), 0.0
    if max_iter is None:
        max_iter = 20 * d.shape[1] + 100
    out = lsqr(d, eta.values, atol=tol, btol=tol, iter_lim=max_iter)
    omega = Cochain(eta.degree - 1, out[0], cx)
    residual = float(np.linalg.norm(d @ out[0] - eta.values) / enorm)
    if out[1] == 7:
        raise PrimitiveError(
            f"LSQR hit the iteration cap ({max_iter}); residual {residual:.3e}", omega, residual)
    return omega, residual


def gauge_shift(omega, beta):
    """omega + d(beta): another primitive of the same d(omega)."""
    return omega + coboundary(beta)


@dataclass(frozen=True, eq=False)
class HodgeSplit:
    exact_part: Cochain
    coexact_part: Cochain
    harmonic_part: Cochain
    residual: float

    def reconstruction(self):
        return self.exact_part + self.coexact_part + self.harmonic_part


def _diag_or_factor(m):
    if (m - sp.diags(m.diagonal())).nnz == 0:
        inv = 1.0 / m.diagonal()
        return lambda x: inv * x
    lu = splu(m.tocsc())
    return lu.solve


def hodge_decompose(eta, tol=1e-10, mass="identity"):
    """Split eta into exact + coexact + harmonic parts, orthogonal in the mass inner product."""
    cx = eta.complex
    k = eta.degree
    if not 1 <= k <= cx.dim:
        raise ValueError("Hodge decomposition needs 1 <= degree <= dim")
    m_k = mass_matrix(cx, k, mass)
    x = eta.values

    d_lo = cx.boundary_matrix(k - 1)
    m_lo = mass_matrix(cx, k - 1, mass)
    # exact: M-orthogonal projection onto im d_{k-1}
    a_op = (d_lo.T @ m_k @ d_lo).tocsr()
    a, info = minres(a_op, d_lo.T @ (m_k @ x), rtol=tol, maxiter=20 * a_op.shape[0])
    if info > 0:
        raise HodgeError(f"exact-part solve did not converge (info={info})")
    exact = d_lo @ a

    if k < cx.dim:
        d_hi = cx.boundary_matrix(k)
        m_hi = mass_matrix(cx, k + 1, mass)
        minv = _diag_or_factor(m_k)
        n_hi = d_hi.shape[0]

        def delta(b):
            return minv(d_hi.T @ (m_hi @ b))

        # coexact: M-orthogonal projection onto im(delta), delta = M_k^-1 d^T M_{k+1}
        op = LinearOperator((n_hi, n_hi), matvec=lambda b: m_hi @ (d_hi @ delta(b)), dtype=float)
        b, info = minres(op, m_hi @ (d_hi @ x), rtol=tol, maxiter=20 * n_hi)
        if info > 0:
            raise HodgeError(f"coexact-part solve did not converge (info={info})")
        coexact = delta(b)
    else:
        coexact = np.zeros_like(x)
    harmonic = x - exact - coexact
    parts = [Cochain(k, v, cx) for v in (exact, coexact, harmonic)]
    residual = float(np.linalg.norm(parts[0].values + parts[1].values + parts[2].values - x))
    return HodgeSplit(*parts, residual)


def inner(a, b, mass="identity"):
    a._same(b)
    if mass == "identity":
        return float(a.values @ b.values)
    return float(a.values @ (mass_matrix(a.complex, a.degree, mass) @ b.values))
