import numpy as np
import pytest

import curlamr.problems as problems
from curlamr.fem import (EdgeSpace, SolutionField, assemble_auxiliary,
                         assemble_primal, energy_error, energy_norm_exact,
                         galerkin_residual, interpolate_edge, mesh_geometry,
                         solve_system, whitney_basis)
from curlamr.linalg import SolveConfig
from curlamr.mesh import LOCAL_EDGES, TetMesh, bisect, build_box_mesh
from curlamr.problems import ProblemSpec, example1, example2
from curlamr.quadrature import edge_rule


def _constant_field_problem(c, beta=1.0):
    """Exact solution u = 0.5 c x x (in ND0), curl u = c, f = beta u."""
    c = np.asarray(c, dtype=np.float64)

    def u(points):
        return 0.5 * np.cross(c, np.atleast_2d(points))

    def curl_u(points):
        return np.broadcast_to(c, (np.atleast_2d(points).shape[0], 3)).copy()

    def sigma(points):
        return curl_u(points)

    def zero_vec(points):
        return np.zeros((np.atleast_2d(points).shape[0], 3))

    def f(points):
        return beta * u(points)

    return ProblemSpec(
        name="constant_curl", variant="test", domain_box=None,
        mu_by_label={0: 1.0}, beta_by_label={0: beta},
        subdomain_classifier=lambda pts: np.zeros(len(np.atleast_2d(pts)), dtype=np.int64),
        exact_u=u, exact_curl_u=curl_u, exact_sigma=sigma,
        exact_curl_sigma=zero_vec, f=f,
        div_f=lambda pts: np.zeros(len(np.atleast_2d(pts))),
        g_D=lambda pts, n: np.cross(u(pts), n))


# -- whitney basis ----------------------------------------------------------


def test_whitney_duality(random_tet_mesh):
    """Circulation of basis k along edge k' is the Kronecker delta."""
    m = random_tet_mesh
    verts = m.vertices[m.tets[0]]
    wb = whitney_basis(verts, m.tets[0])
    rule = edge_rule(5)
    for kprime, (a, b) in enumerate(LOCAL_EDGES):
        ga, gb = m.tets[0, a], m.tets[0, b]
        vec = verts[b] - verts[a]
        if ga > gb:  # global orientation low -> high
            vec = -vec
        acc = np.zeros(6)
        for t, w in zip(rule.points[:, 1], rule.weights):
            lam = np.zeros(4)
            lam[a], lam[b] = 1 - t, t
            acc += w * wb.eval(lam)[0] @ vec
        expected = np.zeros(6)
        expected[kprime] = 1.0
        assert np.abs(acc - expected).max() < 1e-13


def test_whitney_curl_constant(random_tet_mesh):
    # curls are constant: central differences at the centroid match the
    # closed form, and basis evaluation is exact at any barycentric point
    m = random_tet_mesh
    wb = whitney_basis(m.vertices[m.tets[0]], m.tets[0])
    grads = wb.grads
    verts = m.vertices[m.tets[0]]
    p0 = verts.mean(axis=0)
    h = 1e-6

    def field(x, k):
        lam = np.concatenate([[1.0], grads[1:] @ (x - verts[0])])
        lam[0] = 1 - lam[1:].sum()
        return wb.eval(lam[None, :])[0, k]

    for k in range(6):
        curl_fd = np.zeros(3)
        for i, (j, l) in enumerate([(1, 2), (2, 0), (0, 1)]):
            ej, el = np.eye(3)[j], np.eye(3)[l]
            dj = (field(p0 + h * ej, k)[l] - field(p0 - h * ej, k)[l]) / (2 * h)
            dl = (field(p0 + h * el, k)[j] - field(p0 - h * el, k)[j]) / (2 * h)
            curl_fd[i] = dj - dl
        assert np.abs(curl_fd - wb.curls[k]).max() < 1e-7


def test_reference_tet_basis_at_centroid():
    """Frozen symbolic values of lam_a grad(lam_b) - lam_b grad(lam_a)."""
    verts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    wb = whitney_basis(verts, [0, 1, 2, 3])
    centroid = np.full(4, 0.25)
    vals = wb.eval(centroid[None, :])[0]
    expected = 0.25 * np.array([
        [2.0, 1, 1], [1, 2, 1], [1, 1, 2],
        [-1, 1, 0], [-1, 0, 1], [0, -1, 1]])
    assert np.abs(vals - expected).max() < 1e-14


def test_degenerate_tet_rejected():
    verts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0.5, 0.5, 0]])
    with pytest.raises(ValueError):
        whitney_basis(verts)


# -- assembly ---------------------------------------------------------------


def closed_form_element_matrix(verts, gids, c_curl, c_mass):
    """Independent oracle: exact simplex integrals of the ND0 forms.

    Uses int lam_p lam_q = V (1 + delta_pq) / 20 and constant curls.
    """
    wb = whitney_basis(verts, gids)
    V = wb.volume
    g = wb.grads
    s = wb.signs
    M = np.empty((6, 6))
    for i, (a, b) in enumerate(LOCAL_EDGES):
        for j, (c, d) in enumerate(LOCAL_EDGES):
            lam = lambda p, q: V * (1 + (p == q)) / 20.0
            mass = (g[b] @ g[d]) * lam(a, c) - (g[b] @ g[c]) * lam(a, d) \
                - (g[a] @ g[d]) * lam(b, c) + (g[a] @ g[c]) * lam(b, d)
            M[i, j] = c_mass * s[i] * s[j] * mass \
                + c_curl * V * (wb.curls[i] @ wb.curls[j])
    return M


def test_one_tet_assembly_vs_closed_form(one_tet):
    prob = _constant_field_problem([0.0, 0.0, 0.0])
    system = assemble_primal(one_tet, prob)
    A = system.matrix.toarray()
    oracle = closed_form_element_matrix(one_tet.vertices[one_tet.tets[0]],
                                        one_tet.tets[0], 1.0, 1.0)
    assert np.abs(A - oracle).max() < 1e-12 * np.abs(oracle).max()
    assert np.abs(system.rhs).max() == 0.0


def test_assembled_symmetry_and_spd(unit_cube):
    prob = example2("fdiv0")
    mesh = build_box_mesh(prob.domain_box, (2, 2, 2),
                          classifier=prob.subdomain_classifier)
    for assemble in (assemble_primal, assemble_auxiliary):
        system = assemble(mesh, prob)
        assert system.matrix.symmetry_defect() < 1e-13
        Aff = system.matrix.submatrix(system.space.free).toarray()
        w = np.linalg.eigvalsh(Aff)
        assert w.min() > 0


def test_constant_field_reproduced(unit_cube):
    mesh = bisect(unit_cube, np.arange(unit_cube.num_tets))
    c = np.array([0.7, -0.3, 0.2])
    prob = _constant_field_problem(c, beta=2.0)
    system = assemble_primal(mesh, prob)
    u_T, _, _ = solve_system(system, SolveConfig(tol=1e-12))
    exact_dofs = interpolate_edge(prob.exact_u, mesh)
    assert np.abs(u_T.coefficients - exact_dofs).max() < 1e-9
    assert galerkin_residual(system, u_T) < 1e-10


def test_zero_data_zero_solution(unit_cube):
    prob = _constant_field_problem([0.0, 0.0, 0.0])
    for assemble in (assemble_primal, assemble_auxiliary):
        system = assemble(unit_cube, prob)
        x, iters, res = solve_system(system, SolveConfig())
        assert np.abs(x.coefficients).max() == 0.0


def test_coefficient_role_swap():
    p1 = example2("fdiv0")
    mesh = build_box_mesh(p1.domain_box, (2, 2, 2),
                          classifier=p1.subdomain_classifier)
    aux = assemble_auxiliary(mesh, p1).matrix.toarray()

    swapped = example2("fdiv0")
    swapped.mu_by_label, swapped.beta_by_label = (p1.beta_by_label,
                                                  p1.mu_by_label)
    primal = assemble_primal(mesh, swapped).matrix.toarray()
    assert np.abs(aux - primal).max() < 1e-13 * np.abs(aux).max()


def test_nonpositive_coefficient_rejected(unit_cube):
    prob = _constant_field_problem([1.0, 0, 0])
    prob.mu_by_label = {0: -1.0}
    with pytest.raises(ValueError, match="positive"):
        assemble_primal(unit_cube, prob)


def test_auxiliary_sigma_vanishes_example1():
    """The exact magnetizing field of the gradient benchmark is zero; with
    the potential-based load the discrete one vanishes to roundoff on
    every refinement level (trivially non-increasing toward zero)."""
    prob = example1("fdiv0")
    mesh = build_box_mesh(prob.domain_box, (2, 2, 1),
                          classifier=prob.subdomain_classifier)
    norms = []
    for _ in range(3):
        system = assemble_auxiliary(mesh, prob)
        sigma_T, _, _ = solve_system(system, SolveConfig())
        mu = prob.mu_per_tet(mesh)
        beta = prob.beta_per_tet(mesh)
        _, nrm = energy_error(mesh, sigma_T, None, None, beta, mu, 4)
        norms.append(nrm)
        mesh = bisect(mesh, np.arange(mesh.num_tets))
    assert max(norms) < 1e-12


# -- interpolation ----------------------------------------------------------


def test_interpolate_constant(two_tets):
    c = np.array([0.3, 0.4, -0.2])
    dofs = interpolate_edge(lambda pts: np.broadcast_to(c, (len(pts), 3)).copy(),
                            two_tets)
    assert np.abs(dofs - two_tets.edge_vectors @ c).max() < 1e-14


def test_interpolate_gradient_fundamental_theorem(two_tets):
    psi = lambda pts: np.sin(pts[:, 0]) * pts[:, 1] + pts[:, 2] ** 2

    def grad_psi(pts):
        return np.column_stack([np.cos(pts[:, 0]) * pts[:, 1],
                                np.sin(pts[:, 0]),
                                2 * pts[:, 2]])

    dofs = interpolate_edge(grad_psi, two_tets, degree=9)
    ends = two_tets.ent.edges
    expected = psi(two_tets.vertices[ends[:, 1]]) - psi(two_tets.vertices[ends[:, 0]])
    assert np.abs(dofs - expected).max() < 1e-9


def test_interpolate_example1_vs_composite_oracle():
    prob = example1("fnothdiv")
    mesh = build_box_mesh(prob.domain_box, (4, 4, 1),
                          classifier=prob.subdomain_classifier)
    # pick an edge far from the singular axis
    mid = 0.5 * (mesh.vertices[mesh.ent.edges[:, 0]]
                 + mesh.vertices[mesh.ent.edges[:, 1]])
    far = int(np.argmax(np.hypot(mid[:, 0], mid[:, 1])))
    dof = interpolate_edge(prob.exact_u, mesh, [far])[0]
    a = mesh.vertices[mesh.ent.edges[far, 0]]
    vec = mesh.edge_vectors[far]
    # 1000-point composite midpoint rule oracle
    t = (np.arange(1000) + 0.5) / 1000
    pts = a[None, :] + t[:, None] * vec[None, :]
    oracle = np.mean(prob.exact_u(pts) @ vec)
    assert abs(dof - oracle) < 1e-7 * max(abs(oracle), 1.0)


# -- energy norm ------------------------------------------------------------


def test_energy_error_self_is_zero(two_tets):
    # exact field callbacks receive quadrature points flattened in tet
    # order; evaluating the field's own Whitney expansion there must give
    # a vanishing energy distance
    rng = np.random.default_rng(2)
    space = EdgeSpace(two_tets, "dirichlet")
    field = SolutionField(space, rng.standard_normal(two_tets.num_edges))
    grads, vols, signs = mesh_geometry(two_tets)
    coeffs = field.tet_coefficients()
    curls = field.curls()

    def exact(points):
        from curlamr.fem import _whitney_values_per_row

        pts = points.reshape(two_tets.num_tets, -1, 3)
        lam = np.empty((two_tets.num_tets, pts.shape[1], 4))
        for t in range(two_tets.num_tets):
            p0 = two_tets.vertices[two_tets.tets[t, 0]]
            lam123 = (pts[t] - p0) @ grads[t, 1:].T
            lam[t] = np.column_stack([1 - lam123.sum(axis=1), lam123])
        return _whitney_values_per_row(grads, signs, coeffs, lam).reshape(-1, 3)

    def exact_curl(points):
        nq = points.shape[0] // two_tets.num_tets
        return np.repeat(curls, nq, axis=0)

    ones = np.ones(two_tets.num_tets)
    per, total = energy_error(two_tets, field, exact, exact_curl, ones, ones, 4)
    assert total < 1e-13


def test_energy_error_constant(unit_cube):
    c = np.array([2.0, -1.0, 0.5])
    ones = np.ones(unit_cube.num_tets)
    exact = lambda pts: np.broadcast_to(c, (len(pts), 3)).copy()
    _, total = energy_error(unit_cube, None, exact, None, ones, ones, 2)
    assert abs(total - np.linalg.norm(c)) < 1e-13  # unit volume


def test_energy_error_vs_high_degree_oracle():
    prob = example2("fdiv0")
    mesh = build_box_mesh(prob.domain_box, (2, 2, 2),
                          classifier=prob.subdomain_classifier)
    system = assemble_primal(mesh, prob)
    u_T, _, _ = solve_system(system, SolveConfig())
    mu = prob.mu_per_tet(mesh)
    beta = prob.beta_per_tet(mesh)
    _, e4 = energy_error(mesh, u_T, prob.exact_u, prob.exact_curl_u, mu, beta, 4)
    _, e8 = energy_error(mesh, u_T, prob.exact_u, prob.exact_curl_u, mu, beta, 8)
    # degree-4 on the coarse trig field is within a percent of degree-8
    assert abs(e4 - e8) < 2e-2 * e8


def test_a_priori_rate_smooth_problem():
    """O(h) energy convergence for the globally smooth configuration.

    Three bisection passes halve every edge (the congruence classes cycle
    with period three), so rates are measured between passes three apart.
    """
    prob = example2("fdiv0", a=1.0)  # uniform coefficients
    mesh = build_box_mesh(prob.domain_box, (4, 4, 4),
                          classifier=prob.subdomain_classifier)
    errs = []
    for i in range(5):
        system = assemble_primal(mesh, prob)
        u_T, _, _ = solve_system(system, SolveConfig())
        mu = prob.mu_per_tet(mesh)
        beta = prob.beta_per_tet(mesh)
        _, err = energy_error(mesh, u_T, prob.exact_u, prob.exact_curl_u,
                              mu, beta, 4)
        errs.append(err)
        if i < 4:
            mesh = bisect(mesh, np.arange(mesh.num_tets))
    for lo, hi in ((0, 3), (1, 4)):
        rate = np.log(errs[lo] / errs[hi]) / np.log(2.0)
        assert rate >= 0.9
