import numpy as np
import pytest

from curlamr.mesh import (DIRICHLET, NEUMANN, NonManifoldError, TetMesh,
                          bisect, build_box_mesh, derive_entities,
                          min_dihedral_angle, vertex_patch)


def _assert_conforming(mesh):
    # every interior face has two tets; every 1-tet face is on the hull
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    for f in mesh.boundary_faces:
        c = mesh.vertices[mesh.ent.faces[f]].mean(axis=0)
        on_hull = any(abs(c[i] - lo[i]) < 1e-12 or abs(c[i] - hi[i]) < 1e-12
                      for i in range(3))
        assert on_hull, "interior face with a single adjacent tet"


def test_kuhn_cube_counts(unit_cube):
    m = unit_cube
    assert m.num_tets == 6
    assert m.num_vertices == 8
    assert m.num_edges == 19
    assert m.num_faces == 18


def test_example1_box_alignment():
    from curlamr.problems import example1

    prob = example1("fdiv0")
    m = build_box_mesh(prob.domain_box, (4, 4, 1),
                       classifier=prob.subdomain_classifier)
    # every tet sits fully inside one quadrant: centroid label matches
    # the label of all four vertices' mean, и no vertex crosses x=0/y=0
    cent = m.vertices[m.tets].mean(axis=1)
    labels = prob.subdomain_classifier(cent)
    assert np.array_equal(labels, m.subdomains)
    verts = m.vertices[m.tets]
    for axis in (0, 1):
        signs = np.sign(verts[:, :, axis])
        has_pos = (signs > 0).any(axis=1)
        has_neg = (signs < 0).any(axis=1)
        assert not np.any(has_pos & has_neg), "tet straddles an interface plane"


def test_misaligned_classifier_rejected():
    classifier = lambda pts: (pts[:, 0] > 0.31).astype(np.int64)
    with pytest.raises(ValueError, match="interface"):
        build_box_mesh(((0, 1), (0, 1), (0, 1)), 2, classifier=classifier)


def test_degenerate_subdivision_rejected():
    with pytest.raises(ValueError):
        build_box_mesh(((0, 1), (0, 1), (0, 1)), 0)


def test_single_tet_entities(one_tet):
    assert one_tet.num_edges == 6
    assert one_tet.num_faces == 4
    assert np.all(one_tet.volumes > 0)


def test_two_tet_entities(two_tets):
    m = two_tets
    assert m.num_vertices == 5
    assert m.num_edges == 9
    assert m.num_faces == 7
    assert m.interior_faces.shape[0] == 1


def test_nonmanifold_rejected():
    verts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1],
                      [1.0, 1, 1], [-1.0, -1, 1]])
    tets = [[0, 1, 2, 3], [4, 1, 2, 3], [5, 1, 2, 3]]
    with pytest.raises(NonManifoldError):
        derive_entities(np.array(tets), verts)


def test_interior_face_orientation(unit_cube):
    # the fixed normal points from the lower- to the higher-indexed tet
    m = unit_cube
    for f in m.interior_faces:
        t1, t2 = m.ent.face_tets[f]
        n = m.ent.face_normals[f]
        c1 = m.vertices[m.tets[t1]].mean(axis=0)
        c2 = m.vertices[m.tets[t2]].mean(axis=0)
        cf = m.vertices[m.ent.faces[f]].mean(axis=0)
        assert n @ (cf - c1) > 0
        assert n @ (c2 - cf) > 0


def test_boundary_normals_outward(unit_cube):
    m = unit_cube
    for f in m.boundary_faces:
        t1 = m.ent.face_tets[f, 0]
        cf = m.vertices[m.ent.faces[f]].mean(axis=0)
        c1 = m.vertices[m.tets[t1]].mean(axis=0)
        assert m.ent.face_normals[f] @ (cf - c1) > 0


def test_bisect_empty_marks_identity(unit_cube):
    assert bisect(unit_cube, []) is unit_cube


def test_bisect_all_conforming(unit_cube):
    m = bisect(unit_cube, np.arange(unit_cube.num_tets))
    _assert_conforming(m)
    assert abs(m.volumes.sum() - unit_cube.volumes.sum()) < 1e-12


def test_uniform_bisection_shape_regularity(unit_cube):
    # the Kuhn/tagged-bisection family preserves min dihedral pi/4 exactly;
    # freeze a slightly smaller bound as the mesh-family constant
    m = unit_cube
    vol0 = m.volumes.sum()
    for _ in range(10):
        m = bisect(m, np.arange(m.num_tets))
        _assert_conforming(m)
    assert abs(m.volumes.sum() - vol0) < 1e-12 * vol0
    assert m.num_tets == 6 * 2 ** 10
    assert min_dihedral_angle(m) >= 0.78


def test_adaptive_bisection_conforming(unit_cube):
    rng = np.random.default_rng(0)
    m = unit_cube
    vol0 = m.volumes.sum()
    for _ in range(8):
        marked = rng.choice(m.num_tets, size=max(1, m.num_tets // 6),
                            replace=False)
        m = bisect(m, marked)
        _assert_conforming(m)
        assert abs(m.volumes.sum() - vol0) < 1e-12 * vol0
    assert min_dihedral_angle(m) >= 0.78


def test_label_and_tag_inheritance():
    classifier = lambda pts: (pts[:, 0] > 0.5).astype(np.int64)
    bc = lambda pts: np.where(pts[:, 2] > 0.999, NEUMANN, DIRICHLET)
    m = build_box_mesh(((0, 1), (0, 1), (0, 1)), 2, classifier=classifier,
                       bc_classifier=bc)
    r = bisect(m, np.arange(m.num_tets))
    cent = r.vertices[r.tets].mean(axis=1)
    assert np.array_equal(r.subdomains, classifier(cent))
    for f in r.boundary_faces:
        c = r.vertices[r.ent.faces[f]].mean(axis=0)
        assert r.boundary_tags[f] == (NEUMANN if c[2] > 0.999 else DIRICHLET)


def test_partition_of_unity(unit_cube):
    m = bisect(unit_cube, np.arange(unit_cube.num_tets))
    rng = np.random.default_rng(1)
    pts = rng.random((100, 3))
    from curlamr.fem import mesh_geometry

    grads, _, _ = mesh_geometry(m)
    for x in pts:
        # locate the containing tet and check the four hat values sum to 1
        found = False
        for t in range(m.num_tets):
            p0 = m.vertices[m.tets[t, 0]]
            lam123 = grads[t, 1:] @ (x - p0)
            lam = np.concatenate([[1.0 - lam123.sum()], lam123])
            if np.all(lam >= -1e-12):
                assert abs(lam.sum() - 1.0) < 1e-12
                found = True
                break
        assert found


def test_vertex_patch_interior(unit_cube):
    m = bisect(unit_cube, np.arange(unit_cube.num_tets))
    m = bisect(m, np.arange(m.num_tets))
    interior = [z for z in range(m.num_vertices)
                if not np.any(np.abs(m.vertices[z]) < 1e-12)
                and not np.any(np.abs(m.vertices[z] - 1.0) < 1e-12)]
    assert interior, "refined cube should have interior vertices"
    z = interior[0]
    patch = vertex_patch(m, z)
    assert patch.interior_faces.size > 0
    members = set(int(t) for t in patch.tets)
    for f in patch.interior_faces:
        t1, t2 = m.ent.face_tets[f]
        assert int(t1) in members and int(t2) in members
        assert z in m.ent.faces[f]
    for g in patch.boundary_faces:
        t1, t2 = m.ent.face_tets[g]
        inside = (int(t1) in members) + (int(t2) in members if t2 >= 0 else 0)
        assert inside == 1


def test_vertex_patch_corner(unit_cube):
    patch = vertex_patch(unit_cube, 0)  # corner (0,0,0)
    # its patch boundary includes domain-boundary faces with tags
    from curlamr.mesh import VertexPatch

    kinds = set(int(k) for k in patch.boundary_kinds)
    assert VertexPatch.KIND_DIRICHLET in kinds


def test_patch_cover(unit_cube):
    m = bisect(unit_cube, np.arange(unit_cube.num_tets))
    count = np.zeros(m.num_tets, dtype=int)
    for z in range(m.num_vertices):
        count[vertex_patch(m, z).tets] += 1
    assert np.all(count == 4)


def test_refinement_edge_is_longest_initially(unit_cube):
    m = unit_cube
    for t in range(m.num_tets):
        a, b = m.refinement_edge(t)
        length = np.linalg.norm(m.vertices[a] - m.vertices[b])
        assert abs(length - np.sqrt(3.0)) < 1e-12  # the cell diagonal
