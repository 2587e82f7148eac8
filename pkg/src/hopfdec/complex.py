"""Oriented simplicial complexes: spheres, cones over spheres, and mesh files.

Simplices of every degree are stored as vertex tuples sorted by global vertex
index.  The orientation of a top simplex relative to that sorted order is kept
in ``orientation`` (+1 / -1), so cochain algebra works on an ordered complex
while integration respects the manifold orientation.
"""

import hashlib
import itertools
import json
import math
from functools import cached_property

import numpy as np
import scipy.sparse as sp

MESH_FORMAT = "hopfdec-mesh"
MESH_VERSION = 1
# refuse meshes above this many top simplices (~ level 5 on S^3)
MAX_TOP_SIMPLICES = 600_000


def _row_keys(rows):
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    return rows.view(np.dtype((np.void, rows.dtype.itemsize * rows.shape[1]))).ravel()


def _sorted_unique(rows):
    if len(rows) == 0:
        return rows.reshape(0, rows.shape[1] if rows.ndim == 2 else 0)
    return np.unique(rows, axis=0)


class SimplicialComplex:
    """Pure oriented simplicial complex determined by its top simplices."""

    def __init__(self, vertices, top_simplices, orientation=None, kind="manifold"):
        self.vertices = np.asarray(vertices, dtype=float)
        top = np.sort(np.asarray(top_simplices, dtype=np.int64), axis=1)
        self.dim = top.shape[1] - 1
        self.kind = kind
        order = np.lexsort(top.T[::-1])
        top = top[order]
        if orientation is None:
            orientation = self._geometric_orientation(top)
        else:
            orientation = np.asarray(orientation, dtype=np.int64)[order]
        if not np.all(np.isin(orientation, (-1, 1))):
            raise ValueError("orientation entries must be +1 or -1")
        self.orientation = orientation
        skel = [None] * (self.dim + 1)
        skel[self.dim] = top
        for k in range(self.dim - 1, -1, -1):
            faces = np.vstack([top[:, list(c)]
                               for c in itertools.combinations(range(self.dim + 1), k + 1)])
            skel[k] = _sorted_unique(faces)
        self.simplices = skel
        self._keys = {}

    # -- construction helpers -------------------------------------------------

    def _geometric_orientation(self, top):
        """Sign of the sorted vertex order relative to the ambient orientation.

        Sphere-type complexes (ambient dimension dim+1) use the outward normal
        first convention, i.e. sign det[v0, v1 - v0, ..., vd - v0].
        """
        v = self.vertices
        edges = v[top[:, 1:]] - v[top[:, :1]]
        amb = v.shape[1]
        if amb == self.dim + 1:
            mats = np.concatenate([v[top[:, :1]], edges], axis=1)
        elif amb == self.dim:
            mats = edges
        else:
            return np.ones(len(top), dtype=np.int64)
        s = np.sign(np.linalg.det(mats)).astype(np.int64)
        s[s == 0] = 1
        return s

    # -- combinatorics ---------------------------------------------------------

    def count(self, k):
        return len(self.simplices[k])

    @property
    def counts(self):
        return [self.count(k) for k in range(self.dim + 1)]

    def euler_characteristic(self):
        return sum((-1) ** k * c for k, c in enumerate(self.counts))

    def index_of(self, k, rows):
        """Indices of the given sorted k-simplices (rows) in simplices[k]."""
        if k not in self._keys:
            keys = _row_keys(self.simplices[k])
            order = np.argsort(keys)
            self._keys[k] = (keys[order], order)
        skeys, order = self._keys[k]
        q = _row_keys(rows)
        pos = np.searchsorted(skeys, q)
        pos = np.minimum(pos, len(skeys) - 1)
        if not np.all(skeys[pos] == q):
            raise KeyError(f"simplex not found in {k}-skeleton")
        return order[pos]

    def boundary_matrix(self, k):
        """Signed incidence d_k : C^k -> C^{k+1} (rows (k+1)-simplices, cols k-simplices)."""
        if not 0 <= k < self.dim:
            raise ValueError(f"no coboundary from degree {k} on a {self.dim}-complex")
        return self._coboundary[k]

    @cached_property
    def _coboundary(self):
        mats = []
        for k in range(self.dim):
            high = self.simplices[k + 1]
            rows, cols, vals = [], [], []
            for j in range(k + 2):
                faces = np.delete(high, j, axis=1)
                rows.append(np.arange(len(high)))
                cols.append(self.index_of(k, faces))
                vals.append(np.full(len(high), (-1) ** j, dtype=np.int64))
            m = sp.csr_matrix((np.concatenate(vals).astype(float),
                               (np.concatenate(rows), np.concatenate(cols))),
                              shape=(len(high), len(self.simplices[k])))
            mats.append(m)
        return mats

    def top_face_pairing(self):
        """For each (dim-1)-simplex, the signed count of top simplices inducing it.

        Returns (multiplicity, signed_sum): on a closed oriented manifold
        every face has multiplicity 2 and signed sum 0.
        """
        d = self.boundary_matrix(self.dim - 1)
        signed = d.T @ self.orientation.astype(float)
        mult = np.asarray(abs(d).sum(axis=0)).ravel()
        return mult, signed

    def is_closed_manifold(self):
        mult, signed = self.top_face_pairing()
        return bool(np.all(mult == 2) and np.all(signed == 0))

    # -- geometry --------------------------------------------------------------

    def simplex_volumes(self, k):
        if k == 0:
            return np.ones(self.count(0))
        s = self.simplices[k]
        e = self.vertices[s[:, 1:]] - self.vertices[s[:, :1]]
        g = np.einsum("nij,nkj->nik", e, e)
        return np.sqrt(np.maximum(np.linalg.det(g), 0.0)) / math.factorial(k)

    def max_edge_length(self):
        e = self.simplices[1]
        return float(np.max(np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)))

    # -- io ---------------------------------------------------------------------

    def to_dict(self):
        return {
            "format": MESH_FORMAT,
            "version": MESH_VERSION,
            "dim": int(self.dim),
            "vertices": self.vertices.tolist(),
            "top_simplices": self.simplices[self.dim].tolist(),
            "orientation": self.orientation.tolist(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), separators=(",", ":"))

    def content_hash(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()


class ConeComplex(SimplicialComplex):
    """Layered cone over a closed 3-complex, apex at the origin.

    Vertex 0 is the apex; vertex 1 + (j-1)*V + i sits on ring j at
    radius j/layers above base vertex i.
    """

    def __init__(self, base, layers):
        self.base = base
        self.layers = layers
        nb = base.count(0)
        radii = np.arange(1, layers + 1) / layers
        verts = np.vstack([np.zeros((1, base.vertices.shape[1]))] +
                          [r * base.vertices for r in radii])
        tets = base.simplices[base.dim]
        d = base.dim
        cells = [np.column_stack([np.zeros(len(tets), dtype=np.int64), 1 + tets])]
        for j in range(2, layers + 1):
            inner = 1 + (j - 2) * nb + tets
            outer = 1 + (j - 1) * nb + tets
            # staircase split of tet x interval, consistent with the global order
            for i in range(d + 1):
                cells.append(np.column_stack([inner[:, :i + 1], outer[:, i:]]))
        super().__init__(verts, np.vstack(cells), kind="cone")

    def ring_vertices(self, j):
        nb = self.base.count(0)
        return 1 + (j - 1) * nb + np.arange(nb)

    def radius_of_ring(self, j):
        return j / self.layers

    @property
    def radial_vertex_base(self):
        """Base vertex index under each cone vertex (-1 for the apex)."""
        nb = self.base.count(0)
        return np.concatenate([[-1], np.tile(np.arange(nb), self.layers)])

    @property
    def vertex_ring(self):
        nb = self.base.count(0)
        return np.concatenate([[0], np.repeat(np.arange(1, self.layers + 1), nb)])

    def boundary_orientation(self):
        """Induced orientation on the outer-ring tets, as (tets in base indexing, signs)."""
        d = self.boundary_matrix(self.dim - 1)
        signed = d.T @ self.orientation.astype(float)
        faces = self.simplices[self.dim - 1]
        on_outer = np.all(self.vertex_ring[faces] == self.layers, axis=1)
        nb = self.base.count(0)
        base_faces = faces[on_outer] - 1 - (self.layers - 1) * nb
        return base_faces, signed[on_outer].astype(np.int64)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def _sixteen_cell():
    verts = []
    for i in range(4):
        for s in (1.0, -1.0):
            e = np.zeros(4)
            e[i] = s
            verts.append(e)
    tets = [[2 * i + b[i] for i in range(4)] for b in itertools.product((0, 1), repeat=4)]
    return np.array(verts), np.array(tets, dtype=np.int64)


def _subdivide(verts, tets):
    """Edge-midpoint subdivision of tetrahedra with projection to the unit sphere."""
    edges = np.unique(np.sort(np.vstack([tets[:, list(c)] for c in itertools.combinations(range(4), 2)]),
                              axis=1), axis=0)
    mids = verts[edges[:, 0]] + verts[edges[:, 1]]
    mids /= np.linalg.norm(mids, axis=1)[:, None]
    nv = len(verts)
    keys = _row_keys(edges)
    order = np.argsort(keys)
    skeys = keys[order]

    def mid(a, b):
        pair = np.sort(np.column_stack([a, b]), axis=1)
        return nv + order[np.searchsorted(skeys, _row_keys(pair))]

    a, b, c, d = tets.T
    ab, ac, ad = mid(a, b), mid(a, c), mid(a, d)
    bc, bd, cd = mid(b, c), mid(b, d), mid(c, d)
    # four corners plus the inner octahedron cut along the ac-bd diagonal
    new = np.vstack([
        np.column_stack([a, ab, ac, ad]), np.column_stack([ab, b, bc, bd]),
        np.column_stack([ac, bc, c, cd]), np.column_stack([ad, bd, cd, d]),
        np.column_stack([ab, ac, ad, bd]), np.column_stack([ab, ac, bc, bd]),
        np.column_stack([ac, ad, bd, cd]), np.column_stack([ac, bc, bd, cd]),
    ])
    return np.vstack([verts, mids]), new


def build_sphere3_mesh(refinement_level):
    """Triangulated unit S^3: the 16-cell boundary after `refinement_level` subdivisions."""
    if refinement_level < 0:
        raise ValueError("refinement level must be >= 0")
    n_top = 16 * 8 ** refinement_level
    if n_top > MAX_TOP_SIMPLICES:
        raise MemoryError(
            f"level {refinement_level} needs {n_top} tetrahedra "
            f"(~{n_top * 400 / 2**20:.0f} MiB); limit is {MAX_TOP_SIMPLICES}")
    verts, tets = _sixteen_cell()
    for _ in range(refinement_level):
        verts, tets = _subdivide(verts, tets)
    return SimplicialComplex(verts, tets, kind="sphere")


def build_sphere2_mesh(refinement_level):
    """Triangulated unit S^2: octahedron with midpoint subdivision."""
    verts = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], float)
    tris = np.array([[i, j, k] for i in (0, 1) for j in (2, 3) for k in (4, 5)])
    for _ in range(refinement_level):
        edges = np.unique(np.sort(np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [0, 2]]]),
                                  axis=1), axis=0)
        mids = verts[edges[:, 0]] + verts[edges[:, 1]]
        mids /= np.linalg.norm(mids, axis=1)[:, None]
        keys = _row_keys(edges)
        order = np.argsort(keys)
        skeys = keys[order]
        nv = len(verts)

        def mid(a, b):
            pair = np.sort(np.column_stack([a, b]), axis=1)
            return nv + order[np.searchsorted(skeys, _row_keys(pair))]

        a, b, c = tris.T
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        tris = np.vstack([np.column_stack(x) for x in
                          ([a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca])])
        verts = np.vstack([verts, mids])
    return SimplicialComplex(verts, tris, kind="sphere")


def build_circle_mesh(samples, radius=1.0):
    """Closed polygon with `samples` vertices, as an oriented 1-complex in R^2."""
    if samples < 3:
        raise ValueError("a circle mesh needs at least 3 vertices")
    s = 2 * np.pi * np.arange(samples) / samples
    verts = radius * np.column_stack([np.cos(s), np.sin(s)])
    idx = np.arange(samples)
    return SimplicialComplex(verts, np.column_stack([idx, (idx + 1) % samples]), kind="sphere")


def build_cone_mesh(base, radial_layers):
    if radial_layers < 1:
        raise ValueError("radial_layers must be >= 1")
    if base.dim != 3 or not base.is_closed_manifold():
        raise ValueError("cone base must be a closed oriented 3-complex")
    return ConeComplex(base, int(radial_layers))


def sphere_from_ring(cone, j):
    """The ring-j sphere of a cone mesh, rescaled to the unit sphere.

    Vertex i of the result is cone vertex ``cone.ring_vertices(j)[i]``.
    """
    if not 1 <= j <= cone.layers:
        raise ValueError(f"ring {j} outside 1..{cone.layers}")
    verts = cone.vertices[cone.ring_vertices(j)] / cone.radius_of_ring(j)
    return SimplicialComplex(verts, cone.base.simplices[cone.base.dim], kind="sphere")


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------

def mesh_from_dict(data):
    if data.get("format", MESH_FORMAT) != MESH_FORMAT:
        raise ValueError(f"not a {MESH_FORMAT} file")
    if int(data.get("version", MESH_VERSION)) > MESH_VERSION:
        raise ValueError(f"unsupported mesh version {data['version']}")
    top = np.asarray(data["top_simplices"], dtype=np.int64)
    if top.shape[1] != int(data["dim"]) + 1:
        raise ValueError("top simplex size does not match dim")
    return SimplicialComplex(data["vertices"], top, data.get("orientation"))


def save_mesh(mesh, path):
    text = mesh.to_json()
    with open(path, "w") as fh:
        fh.write(text)
    return hashlib.sha256(text.encode()).hexdigest()


def load_mesh(path):
    with open(path) as fh:
        return mesh_from_dict(json.load(fh))
