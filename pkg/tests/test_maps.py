import numpy as np
import pytest

from hopfdec.complex import SimplicialComplex, build_cone_mesh, build_sphere2_mesh
from hopfdec.heisenberg import contact_residuals
from hopfdec.hopf import SampledMap, restrict_to_ring
from hopfdec.maps import (
    MapSpec, NonHorizontalMapError, NotInjectiveError, center_difference_check,
    compose_orthogonal, constant_map, contact_check, curve_as_map, figure_eight_embedding,
    hopf_exact_differential, hopf_fibration_map, hopf_values, identity_map, linear_map,
    load_tabulated_map, lobe_area, precompose_rotation, radial_extension, rank_profile,
    resolve_map, rotation_homotopy, save_tabulated_map, sphere2_embedding_into_H2,
    symplectic_rank_check, z_rotation)
from oracles import whitney_sphere_lift


def segment_mesh(samples=11):
    s = np.linspace(0, 1, samples)[:, None]
    idx = np.arange(samples - 1)
    return SimplicialComplex(s, np.column_stack([idx, idx + 1]), kind="segment")


def test_hopf_values(s3_meshes):
    f = hopf_fibration_map(s3_meshes(2))
    assert np.max(np.abs(np.linalg.norm(f.values, axis=1) - 1)) <= 1e-12
    assert np.allclose(hopf_values(np.array([[1.0, 0, 0, 0]])), [[0, 0, 1]])
    assert np.allclose(hopf_values(np.array([[0, 0, 1.0, 0]])), [[0, 0, -1]])


def test_exact_differential_matches_finite_differences(s3_meshes):
    m = s3_meshes(2)
    jac = hopf_exact_differential(m)
    top = m.simplices[3]
    rng = np.random.default_rng(0)
    h = 1e-6
    for s in rng.choice(len(top), 10, replace=False):
        v = m.vertices[top[s]]
        frame = np.linalg.qr((v[1:] - v[0]).T)[0]
        c = v.mean(axis=0)
        for k in range(3):
            plus, minus = c + h * frame[:, k], c - h * frame[:, k]
            fd = (hopf_values((plus / np.linalg.norm(plus))[None])
                  - hopf_values((minus / np.linalg.norm(minus))[None]))[0] / (2 * h)
            assert np.allclose(jac[s][:, k], fd, atol=1e-7)


def test_hopf_rank_profile(s3_meshes):
    for level in (1, 2):
        f = hopf_fibration_map(s3_meshes(level))
        prof = rank_profile(f)
        assert prof.fraction_at_most(2) == 1.0 and prof.excluded == 0
        sv = prof.per_simplex_singular_values
        assert np.all(np.diff(sv, axis=1) <= 0)
        assert np.max(sv[:, 2] / sv[:, 0]) <= 1e-12
        assert prof.fractions.sum() == pytest.approx(1.0)


def test_affine_interpolant_rank_defect_is_order_h(s3_meshes):
    # the P1 interpolant of h picks up sigma_3 ~ h from the curvature of S^2
    med = []
    for level in (2, 3):
        f = hopf_fibration_map(s3_meshes(level))
        sv = np.linalg.svd(f.affine_differential, compute_uv=False)
        med.append(np.median(sv[:, 2] / sv[:, 0]))
    assert 1.6 < med[0] / med[1] < 3.0


def test_rank_profile_trivial_maps(s3_meshes):
    m = s3_meshes(1)
    assert rank_profile(constant_map(m)).fractions[0] == 1.0
    assert rank_profile(identity_map(m)).fractions[3] == 1.0
    assert rank_profile(identity_map(m)).fraction_above(2) == 1.0


def test_rank_profile_excludes_degenerate_simplices():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    mesh = SimplicialComplex(verts, [[0, 1, 2], [0, 1, 3]], kind="patch")
    f = SampledMap(mesh, verts)
    prof = rank_profile(f)
    assert prof.excluded == 1
    assert prof.fractions[2] == 1.0


def test_figure_eight():
    curve = figure_eight_embedding(20001)
    t = curve.t_samples
    assert abs(t[-1] - t[0]) <= 1e-8
    assert np.max(np.abs(contact_residuals(curve))) <= 1e-9
    # analytic lobe area: -1/2 int_0^pi sin^3 s ds = -2/3
    assert lobe_area() == pytest.approx(-2 / 3, rel=1e-6)
    mid = len(t) // 2
    assert np.allclose(curve.base_samples[mid], curve.base_samples[0], atol=1e-12)
    assert t[mid] - t[0] == pytest.approx(8 / 3, rel=1e-6)
    with pytest.raises(ValueError):
        figure_eight_embedding(7)


def test_figure_eight_as_map():
    fmap = curve_as_map(figure_eight_embedding(2001))
    rep = contact_check(fmap)
    assert rep.max_residual <= 1e-9
    assert rank_profile(fmap).fraction_at_most(1) == 1.0
    sym = symplectic_rank_check(SampledMap(fmap.mesh, fmap.values[:, :2]))
    assert np.max(sym.pullback_norm) == 0.0 and sym.violators.size == 0
    assert sym.max_rank_when_isotropic <= 1


def test_contact_check_fixtures():
    mesh = segment_mesh()
    s = mesh.vertices[:, 0]
    vertical = SampledMap(mesh, np.column_stack([s, 0 * s, s]))
    rep = contact_check(vertical)
    assert np.allclose(rep.per_simplex_residual, 1.0)
    assert rep.mean_residual == pytest.approx(1.0)
    assert rep.horizontal_energy == pytest.approx(1.0)
    const = SampledMap(mesh, np.tile([1.0, 2.0, 3.0], (len(s), 1)))
    assert contact_check(const).max_residual == 0.0
    with pytest.raises(ValueError):
        contact_check(SampledMap(mesh, np.zeros((len(s), 2))))


def test_symplectic_rank_check():
    s2 = build_sphere2_mesh(1)
    v = s2.vertices
    line = SampledMap(s2, np.column_stack([v[:, 0], 0 * v[:, 0]]))
    rep = symplectic_rank_check(line)
    assert np.all(rep.pullback_norm == 0) and rep.violators.size == 0
    assert rep.max_rank_when_isotropic <= 1
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    patch = SimplicialComplex(verts, [[0, 1, 2], [1, 2, 3]], kind="patch")
    ident = symplectic_rank_check(SampledMap(patch, verts))
    assert np.all(ident.pullback_norm > 0.5) and np.all(ident.ranks == 2)
    assert ident.violators.size == 0
    with pytest.raises(ValueError):
        symplectic_rank_check(SampledMap(patch, np.zeros((4, 3))))


def test_center_difference_check():
    s2 = build_sphere2_mesh(1)
    f = SampledMap(s2, whitney_sphere_lift(s2.vertices))
    same = center_difference_check(f, f)
    assert len(same.qualifying_simplices) == s2.count(2)
    assert np.all(same.differential_gaps == 0)
    shifted_t = f.with_values(f.values + np.array([0, 0, 0, 0, 0.7]))
    rep = center_difference_check(f, shifted_t)
    assert len(rep.qualifying_simplices) == s2.count(2)
    assert np.max(rep.differential_gaps) <= 10 * 1e-9 * f.lipschitz_estimate
    shifted_x = f.with_values(f.values + np.array([0.3, 0, 0, 0, 0]))
    assert len(center_difference_check(f, shifted_x).qualifying_simplices) == 0
    with pytest.raises(ValueError):
        center_difference_check(f, SampledMap(build_sphere2_mesh(0), np.zeros((6, 5))))


def test_sphere2_embedding_validation():
    s2 = build_sphere2_mesh(3)
    f, rep = sphere2_embedding_into_H2(s2, whitney_sphere_lift(s2.vertices))
    assert rep.max_residual <= 2 * s2.max_edge_length()
    # horizontal => isotropic => rank <= n = 2 (the discrete rank chain)
    sym = symplectic_rank_check(SampledMap(s2, f.values[:, :4]), tol=1e-2)
    assert sym.violators.size == 0
    with pytest.raises(NotInjectiveError):
        sphere2_embedding_into_H2(s2, np.ones((s2.count(0), 5)))
    x = s2.vertices
    vertical = np.zeros((s2.count(0), 5))
    vertical[:, 4] = x[:, 0] + 1e-3 * x[:, 1] + 1e-6 * x[:, 2]
    with pytest.raises(NonHorizontalMapError):
        sphere2_embedding_into_H2(s2, vertical)
    with pytest.raises(ValueError):
        sphere2_embedding_into_H2(s2, np.zeros((s2.count(0), 3)))


def test_contact_residual_of_sampled_lift_shrinks():
    res = []
    for level in (2, 3, 4):
        s2 = build_sphere2_mesh(level)
        res.append(contact_check(SampledMap(s2, whitney_sphere_lift(s2.vertices))).max_residual)
    assert res[0] > res[1] > res[2]


def test_radial_extension(s3_meshes):
    base = s3_meshes(1)
    cone = build_cone_mesh(base, 3)
    f = hopf_fibration_map(base)
    big = radial_extension(f, cone)
    for j in (1, 2, 3):
        assert np.array_equal(big.values[cone.ring_vertices(j)], f.values)
    assert np.array_equal(big.values[0], f.values[0])
    assert np.array_equal(restrict_to_ring(big, 1.0).values, f.values)
    assert 0 in big.singular_vertices
    prof = rank_profile(big)
    assert prof.excluded == base.count(3)  # the apex star
    with pytest.raises(ValueError):
        radial_extension(f, build_cone_mesh(s3_meshes(0), 2))


def test_rotation_homotopy(s3_meshes):
    f = hopf_fibration_map(s3_meshes(1))
    fam = rotation_homotopy(f, 1)
    assert len(fam) == 1 and np.array_equal(fam[0].values, f.values)
    fam = rotation_homotopy(f, 5)
    assert np.allclose(fam[-1].values, f.values @ z_rotation(np.pi).T)
    assert all(rank_profile(g).fraction_at_most(2) == 1.0 for g in fam)
    with pytest.raises(ValueError):
        rotation_homotopy(f, 0)
    with pytest.raises(ValueError):
        rotation_homotopy(f.with_values(2 * f.values), 3)


def test_compose_orthogonal_tracks_oracle_metadata(s3_meshes):
    f = hopf_fibration_map(s3_meshes(1))
    q = z_rotation(0.3)
    g = compose_orthogonal(f, q)
    assert np.allclose(g.meta["hopf_target_rotation"], q)
    assert np.allclose(g.per_simplex_differential, np.einsum("ij,sjk->sik", q, f.per_simplex_differential))
    assert not compose_orthogonal(linear_map(s3_meshes(1), np.eye(3, 4)), q).has_exact_differential


def test_precomposed_rotation(s3_meshes):
    m = s3_meshes(1)
    g = precompose_rotation(m, 0.0)
    assert np.allclose(g.values, hopf_fibration_map(m).values)
    assert rank_profile(precompose_rotation(m, 0.4)).fraction_at_most(2) == 1.0


def test_tabulated_roundtrip(tmp_path, s3_meshes):
    m = s3_meshes(1)
    f = hopf_fibration_map(m)
    path = tmp_path / "map.csv"
    save_tabulated_map(f, path)
    g = load_tabulated_map(path, m)
    assert np.array_equal(g.values, f.values)
    assert np.array_equal(resolve_map(MapSpec("tabulated", {"path": str(path)}), m).values, f.values)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ValueError):
        load_tabulated_map(path, m)
    (tmp_path / "empty.csv").write_text("vertex_index,v1\n")
    with pytest.raises(ValueError):
        load_tabulated_map(tmp_path / "empty.csv", m)


@pytest.mark.parametrize("name", ["hopf", "hopf_rotated", "hopf_reflected", "hopf_precomposed",
                                  "constant", "random_linear", "identity"])
def test_resolve_builtins(s3_meshes, name):
    m = s3_meshes(1)
    f = resolve_map(name, m, seed=1)
    assert f.mesh is m and f.values.shape[0] == m.count(0)


def test_resolve_unknown(s3_meshes):
    with pytest.raises(KeyError):
        resolve_map("nope", s3_meshes(0))
