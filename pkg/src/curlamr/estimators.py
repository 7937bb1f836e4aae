"""A posteriori error estimators for the H(curl) interface problem.

Three estimators share this module:

* ``eta_new``: two-term duality estimator measuring the constitutive
  residual mu*sigma - curl(u) and the equilibrium residual
  curl(sigma) + beta*u - f of the recovered magnetizing field sigma.
* ``eta_tilde``: the same two terms evaluated with a magnetizing field
  recovered locally on vertex patches (``recover_local``) instead of a
  global auxiliary solve.
* ``eta_res``: the classical weighted residual estimator, used as the
  comparison baseline.

``duality_gap`` evaluates the primal and complementary energy functionals
whose difference reproduces eta^2 exactly at the discrete level.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .backend import kernels
from .fem import _face_quadrature_in_tets, _geometry, _whitney_values_per_row
from .linalg import SingularSystemError, dense_saddle_solve
from .mesh import DIRICHLET, NEUMANN, VertexPatch, vertex_patch
from .quadrature import edge_rule, simplex_rule, triangle_rule


@dataclass
class EstimateReport:
    """Per-element indicators with their squared component split.

    components maps a component name to the per-element squared
    contribution; indicators are the square roots of the component sums.
    """

    name: str
    indicators: np.ndarray
    total: float
    components: dict
    metadata: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        s = float(np.sum(self.indicators ** 2))
        if not np.isfinite(self.total) or abs(self.total ** 2 - s) > 1e-12 * max(s, 1e-300):
            raise ValueError("estimator total inconsistent with indicators")


class BrokenField:
    """Elementwise Whitney field without tangential continuity.

    Coefficients are per-tet circulations in the global edge orientation,
    the same convention as SolutionField.tet_coefficients().
    """

    def __init__(self, mesh, tet_coeffs):
        self.mesh = mesh
        self.tet_coeffs = np.asarray(tet_coeffs, dtype=np.float64)
        if self.tet_coeffs.shape != (mesh.num_tets, 6):
            raise ValueError("broken field needs a (T,6) coefficient array")

    def tet_coefficients(self):
        return self.tet_coeffs

    def values(self, bary_points):
        grads, _, signs = _geometry(self.mesh)
        return kernels.field_values(grads, signs, self.tet_coeffs, bary_points)

    def curls(self):
        grads, vols, signs = _geometry(self.mesh)
        curls = kernels.whitney_curls(grads, signs)
        return np.einsum("tk,tkc->tc", self.tet_coeffs, curls)


def _check_same_mesh(mesh, *fields):
    for f in fields:
        m = getattr(f, "mesh", None)
        if m is not None and m is not mesh:
            raise ValueError("field was built on a different mesh")


def _two_term_indicators(mesh, problem, u_field, sigma_vals, sigma_curls,
                         quad_degree):
    """Squared constitutive and equilibrium residual terms per element."""
    mu = problem.mu_per_tet(mesh)
    beta = problem.beta_per_tet(mesh)
    grads, vols, signs = _geometry(mesh)
    rule = simplex_rule(quad_degree)
    nq = rule.npoints

    ucoef = u_field.tet_coefficients()
    u_vals = kernels.field_values(grads, signs, ucoef, rule.points)
    curls = kernels.whitney_curls(grads, signs)
    u_curls = np.einsum("tk,tkc->tc", ucoef, curls)

    phys = np.einsum("qv,tvc->tqc", rule.points, mesh.vertices[mesh.tets])
    fvals = np.asarray(problem.f(phys.reshape(-1, 3))).reshape(mesh.num_tets, nq, 3)

    resid1 = mu[:, None, None] * sigma_vals - u_curls[:, None, :]
    resid2 = sigma_curls[:, None, :] + beta[:, None, None] * u_vals - fvals
    t1 = kernels.weighted_norm2(vols, rule.weights, 1.0 / mu, resid1)
    t2 = kernels.weighted_norm2(vols, rule.weights, 1.0 / beta, resid2)
    return t1, t2


def _two_term_report(mesh, problem, u_field, sigma_vals, sigma_curls,
                     quad_degree, name, metadata):
    t1, t2 = _two_term_indicators(mesh, problem, u_field, sigma_vals,
                                  sigma_curls, quad_degree)
    ind = np.sqrt(t1 + t2)
    return EstimateReport(name, ind, float(np.sqrt((t1 + t2).sum())),
                          {"constitutive": t1, "equation": t2}, metadata or {})


def eta_new(mesh, u_field, sigma_field, problem, quad_degree=4, metadata=None):
    """Duality estimator from the globally recovered magnetizing field."""
    _check_same_mesh(mesh, u_field, sigma_field)
    rule = simplex_rule(quad_degree)
    grads, _, signs = _geometry(mesh)
    scoef = sigma_field.tet_coefficients()
    s_vals = kernels.field_values(grads, signs, scoef, rule.points)
    curls = kernels.whitney_curls(grads, signs)
    s_curls = np.einsum("tk,tkc->tc", scoef, curls)
    return _two_term_report(mesh, problem, u_field, s_vals, s_curls,
                            quad_degree, "eta_new", metadata)


def eta_tilde(mesh, u_field, sigma_tilde, problem, quad_degree=4, metadata=None):
    """Duality estimator from the locally recovered (broken) field."""
    _check_same_mesh(mesh, u_field, sigma_tilde)
    rule = simplex_rule(quad_degree)
    s_vals = sigma_tilde.values(rule.points)
    s_curls = sigma_tilde.curls()
    return _two_term_report(mesh, problem, u_field, s_vals, s_curls,
                            quad_degree, "eta_tilde", metadata)


# ---------------------------------------------------------------------------
# residual baseline


def eta_res(mesh, u_field, problem, quad_degree=4, face_degree=4,
            metadata=None):
    """Weighted residual estimator for piecewise-constant coefficients.

    Elementwise curl(mu^-1 curl u_T) and div(beta u_T) vanish identically
    for the lowest-order Whitney space, which is hard-coded; the face
    weights are mu_F = max(mu_K1, mu_K2) and beta_F = min(beta_K1, beta_K2).
    Boundary faces contribute no jump terms.
    """
    _check_same_mesh(mesh, u_field)
    if problem.div_f is None:
        raise ValueError("eta_res needs the elementwise divergence of f")
    mu = problem.mu_per_tet(mesh)
    beta = problem.beta_per_tet(mesh)
    grads, vols, signs = _geometry(mesh)
    rule = simplex_rule(quad_degree)
    nq = rule.npoints

    ucoef = u_field.tet_coefficients()
    u_vals = kernels.field_values(grads, signs, ucoef, rule.points)
    phys = np.einsum("qv,tvc->tqc", rule.points, mesh.vertices[mesh.tets])
    flat = phys.reshape(-1, 3)
    fvals = np.asarray(problem.f(flat)).reshape(mesh.num_tets, nq, 3)

    resid = fvals - beta[:, None, None] * u_vals
    h2 = mesh.h_tet ** 2
    t_res = mu * h2 * kernels.weighted_norm2(vols, rule.weights,
                                             np.ones(mesh.num_tets), resid)
    divf = np.asarray(problem.div_f(flat)).reshape(mesh.num_tets, nq)
    div_sq = 6.0 * vols * np.einsum("q,tq->t", rule.weights, divf ** 2)
    t_div = h2 / beta * div_sq

    t_jn = np.zeros(mesh.num_tets)
    t_jt = np.zeros(mesh.num_tets)
    interior = mesh.interior_faces
    if interior.size:
        frule = triangle_rule(face_degree)
        t1 = mesh.ent.face_tets[interior, 0]
        t2 = mesh.ent.face_tets[interior, 1]
        nrm = mesh.ent.face_normals[interior]
        tr1 = _trace_values(mesh, ucoef, interior, 0, frule)
        tr2 = _trace_values(mesh, ucoef, interior, 1, frule)
        jump_n = np.einsum("fqc,fc->fq",
                           beta[t1, None, None] * tr1 - beta[t2, None, None] * tr2,
                           nrm)
        int_n = 2.0 * mesh.face_areas[interior] * \
            np.einsum("q,fq->f", frule.weights, jump_n ** 2)

        curls = kernels.whitney_curls(grads, signs)
        q = np.einsum("tk,tkc->tc", ucoef, curls) / mu[:, None]
        jt = np.cross(q[t1] - q[t2], nrm)
        int_t = mesh.face_areas[interior] * np.einsum("fc,fc->f", jt, jt)

        w = 0.5 * mesh.h_face[interior]
        beta_f = np.minimum(beta[t1], beta[t2])
        mu_f = np.maximum(mu[t1], mu[t2])
        c_n = w / beta_f * int_n
        c_t = w * mu_f * int_t
        np.add.at(t_jn, t1, c_n)
        np.add.at(t_jn, t2, c_n)
        np.add.at(t_jt, t1, c_t)
        np.add.at(t_jt, t2, c_t)

    tot = t_res + t_div + t_jn + t_jt
    return EstimateReport("eta_res", np.sqrt(tot), float(np.sqrt(tot.sum())),
                          {"residual": t_res, "divergence": t_div,
                           "jump_normal": t_jn, "jump_tangential": t_jt},
                          metadata or {})


def _trace_values(mesh, tet_coeffs, faces, side, rule):
    """Whitney trace values on faces from the adjacent tet on `side`."""
    grads, _, signs = _geometry(mesh)
    tids, bary, _ = _face_quadrature_in_tets(mesh, faces, side, rule)
    return _whitney_values_per_row(grads[tids], signs[tids], tet_coeffs[tids],
                                   bary)


def tangential_jump_norms(mesh, broken):
    """L2 norms of [[v x n]] per interior face for a broken field.

    The scale-free conformity check for recovered fields: conforming
    fields return zeros up to roundoff.
    """
    interior = mesh.interior_faces
    rule = triangle_rule(2)
    coeffs = broken.tet_coefficients()
    tr1 = _trace_values(mesh, coeffs, interior, 0, rule)
    tr2 = _trace_values(mesh, coeffs, interior, 1, rule)
    nrm = mesh.ent.face_normals[interior]
    jump = np.cross(tr1 - tr2, nrm[:, None, :])
    sq = 2.0 * mesh.face_areas[interior] * \
        np.einsum("q,fqc,fqc->f", rule.weights, jump, jump)
    return np.sqrt(np.maximum(sq, 0.0))


def broken_l2_norm(mesh, broken):
    grads, vols, signs = _geometry(mesh)
    rule = simplex_rule(2)
    vals = broken.values(rule.points)
    return float(np.sqrt(kernels.weighted_norm2(
        vols, rule.weights, np.ones(mesh.num_tets), vals).sum()))


# ---------------------------------------------------------------------------
# duality functionals


def duality_gap(mesh, u_field, sigma_field, problem, quad_degree=4,
                face_degree=4, use_discrete_trace=True):
    """Primal energy J(u_T), complementary energy J*(sigma_T) and the gap
    2(J - J*), which coincides with eta^2.

    The Dirichlet pairing <g_D, sigma> is evaluated with the tangential
    trace of u_T itself (the data the discrete problem imposes); with
    use_discrete_trace=False the exact g_D callable is used instead, which
    perturbs the identity by the boundary-interpolation error.
    """
    _check_same_mesh(mesh, u_field, sigma_field)
    mu = problem.mu_per_tet(mesh)
    beta = problem.beta_per_tet(mesh)
    grads, vols, signs = _geometry(mesh)
    rule = simplex_rule(quad_degree)
    nq = rule.npoints
    ones = np.ones(mesh.num_tets)

    ucoef = u_field.tet_coefficients()
    scoef = sigma_field.tet_coefficients()
    u_vals = kernels.field_values(grads, signs, ucoef, rule.points)
    s_vals = kernels.field_values(grads, signs, scoef, rule.points)
    curls = kernels.whitney_curls(grads, signs)
    u_curls = np.einsum("tk,tkc->tc", ucoef, curls)
    s_curls = np.einsum("tk,tkc->tc", scoef, curls)

    phys = np.einsum("qv,tvc->tqc", rule.points, mesh.vertices[mesh.tets])
    fvals = np.asarray(problem.f(phys.reshape(-1, 3))).reshape(mesh.num_tets, nq, 3)

    cu = np.broadcast_to(u_curls[:, None, :], u_vals.shape)
    a_uu = kernels.weighted_norm2(vols, rule.weights, 1.0 / mu, cu).sum() \
        + kernels.weighted_norm2(vols, rule.weights, beta, u_vals).sum()
    f_u = kernels.weighted_dot(vols, rule.weights, ones, fvals, u_vals).sum()
    J = 0.5 * a_uu - f_u

    bidx = mesh.boundary_faces
    frule = triangle_rule(face_degree)
    if problem.g_N is not None:
        nfaces = bidx[mesh.boundary_tags[bidx] == NEUMANN]
        if nfaces.size:
            J -= _boundary_pair(mesh, nfaces, frule, ucoef, problem.g_N)

    m_ss = kernels.weighted_norm2(vols, rule.weights, mu, s_vals).sum()
    dfc = fvals - np.broadcast_to(s_curls[:, None, :], s_vals.shape)
    comp = kernels.weighted_norm2(vols, rule.weights, 1.0 / beta, dfc).sum()
    Jstar = -0.5 * m_ss - 0.5 * comp

    dfaces = bidx[mesh.boundary_tags[bidx] == DIRICHLET]
    if dfaces.size:
        if use_discrete_trace:
            tr_u = _trace_values(mesh, ucoef, dfaces, 0, frule)
            tr_s = _trace_values(mesh, scoef, dfaces, 0, frule)
            gd = np.cross(tr_u, mesh.ent.face_normals[dfaces][:, None, :])
            pair = 2.0 * mesh.face_areas[dfaces] * \
                np.einsum("q,fqc,fqc->f", frule.weights, gd, tr_s)
            Jstar -= float(pair.sum())
        else:
            Jstar -= _boundary_pair(mesh, dfaces, frule, scoef, problem.g_D)

    return float(J), float(Jstar), float(2.0 * (J - Jstar))


def _boundary_pair(mesh, faces, rule, tet_coeffs, data):
    """< data(x, n), field > over the given boundary faces."""
    tr = _trace_values(mesh, tet_coeffs, faces, 0, rule)
    _, _, phys = _face_quadrature_in_tets(mesh, faces, 0, rule)
    nrm = mesh.ent.face_normals[faces]
    nq = rule.npoints
    vals = np.asarray(data(phys.reshape(-1, 3),
                           np.repeat(nrm, nq, axis=0))).reshape(-1, nq, 3)
    pair = 2.0 * mesh.face_areas[faces] * \
        np.einsum("q,fqc,fqc->f", rule.weights, vals, tr)
    return float(pair.sum())


# ---------------------------------------------------------------------------
# localized recovery on vertex patches


@dataclass
class PatchSystem:
    """Dense saddle data of one vertex patch.

    Constraint rows are stored in flux (difference) form: each slot row
    fixes the jump coefficient of one face edge, so rows touch only the
    DOFs of that edge.  ``keep`` indexes a maximal independent row subset
    (a spanning forest per edge class); the dropped rows are consequences
    of the kept ones whenever the data telescopes, which the flux
    projection guarantees.
    """

    vertex: int
    tets: np.ndarray
    A: np.ndarray
    rhs1: np.ndarray
    rows_full: np.ndarray
    data_full: np.ndarray
    keep: np.ndarray

    @property
    def B(self):
        return self.rows_full[self.keep]

    @property
    def rhs2(self):
        return self.data_full[self.keep]


class _RecoveryContext:
    """Mesh-level precomputation shared by all patches."""

    def __init__(self, mesh, u_field, problem, quad_degree):
        self.mesh = mesh
        grads, vols, signs = _geometry(mesh)
        self.grads, self.vols, self.signs = grads, vols, signs
        mu = problem.mu_per_tet(mesh)
        beta = problem.beta_per_tet(mesh)
        self.beta = beta
        rule = simplex_rule(quad_degree)
        self.ablocks = kernels.element_matrices(grads, vols, signs,
                                                1.0 / beta, mu,
                                                rule.points, rule.weights)
        self.curls = kernels.whitney_curls(grads, signs)

        ucoef = u_field.tet_coefficients()
        self.q = np.einsum("tk,tkc->tc", ucoef, self.curls) / mu[:, None]

        nq = rule.npoints
        phys = np.einsum("qv,tvc->tqc", rule.points, mesh.vertices[mesh.tets])
        fvals = np.asarray(problem.f(phys.reshape(-1, 3))).reshape(
            mesh.num_tets, nq, 3)
        u_vals = kernels.field_values(grads, signs, ucoef, rule.points)
        rv = fvals - beta[:, None, None] * u_vals
        # moments against the four vertex hats: (T, 4, 3)
        self.r_mom = 6.0 * vols[:, None, None] * np.einsum(
            "q,qv,tqc->tvc", rule.weights, rule.points, rv)

        # flux coefficients of the tangential jump of q on interior faces:
        # flux[f, i] = (1/2) * len_i * ( [[q x n]] . (t_i x n) )
        #            = (1/2) * ( q_T1 - q_T2 ) . edge_vector_i
        fe = mesh.ent.face_edges
        self.face_edge_ids = fe
        t1 = mesh.ent.face_tets[:, 0]
        t2 = mesh.ent.face_tets[:, 1]
        dq = np.where((t2 >= 0)[:, None], self.q[t1] - self.q[np.maximum(t2, 0)],
                      0.0)
        evec = mesh.edge_vectors
        self.face_flux = 0.5 * np.einsum("fc,fic->fi", dq, evec[fe])

        self.problem = problem
        self.edge_vec = evec

    def local_slot(self, tet, edge):
        row = self.mesh.ent.tet_edges[tet]
        for k in range(6):
            if row[k] == edge:
                return k
        raise KeyError("edge not on tet")


def build_patch_system(ctx, patch):
    """Assemble the dense hybrid system of one vertex patch."""
    mesh = ctx.mesh
    z = patch.center
    members = patch.tets
    nloc = members.shape[0]
    lmap = {int(t): i for i, t in enumerate(members)}
    ndof = 6 * nloc

    A = np.zeros((ndof, ndof))
    for i, t in enumerate(members):
        A[6 * i:6 * i + 6, 6 * i:6 * i + 6] = ctx.ablocks[t]

    rhs1 = np.zeros(ndof)
    for i, t in enumerate(members):
        rbar = ctx.r_mom[t, patch.hat_index[i]]
        rhs1[6 * i:6 * i + 6] = (rbar @ ctx.curls[t].T) / ctx.beta[t]

    rows = []
    data = []
    edge_of_row = []
    ends_of_row = []   # (a, b) node ids in the per-edge graph; -1 is ground

    def add_row(cols_vals, value, edge, enda, endb):
        r = np.zeros(ndof)
        for c, v in cols_vals:
            r[c] = v
        rows.append(r)
        data.append(value)
        edge_of_row.append(edge)
        ends_of_row.append((enda, endb))

    # jump slots on faces interior to the patch
    for f in patch.interior_faces:
        t1, t2 = mesh.ent.face_tets[f]
        l1, l2 = lmap[int(t1)], lmap[int(t2)]
        for idx, e in enumerate(ctx.face_edge_ids[f]):
            e = int(e)
            k1 = ctx.local_slot(t1, e)
            k2 = ctx.local_slot(t2, e)
            val = -ctx.face_flux[f, idx] if z in mesh.ent.edges[e] else 0.0
            add_row([(6 * l1 + k1, 1.0), (6 * l2 + k2, -1.0)], val, e, l1, l2)

    # trace slots on the patch boundary: zero tangential trace on faces
    # interior to the domain, projected data on the Neumann part,
    # unconstrained on the Dirichlet part
    erule = edge_rule(5)
    for g, kind in zip(patch.boundary_faces, patch.boundary_kinds):
        if kind == VertexPatch.KIND_DIRICHLET:
            continue
        t1, t2 = mesh.ent.face_tets[g]
        member = int(t1) if int(t1) in lmap else int(t2)
        lt = lmap[member]
        for e in ctx.face_edge_ids[g]:
            e = int(e)
            k = ctx.local_slot(member, e)
            val = 0.0
            if kind == VertexPatch.KIND_NEUMANN and z in mesh.ent.edges[e]:
                val = _neumann_slot_value(ctx, patch, g, e, member, erule)
            add_row([(6 * lt + k, 1.0)], val, e, lt, -1)

    rows = np.array(rows) if rows else np.zeros((0, ndof))
    data = np.array(data) if data else np.zeros(0)

    # spanning forest per edge class keeps a maximal independent subset
    parent = {}

    def find(key):
        while parent.get(key, key) != key:
            parent[key] = parent.get(parent[key], parent[key])
            key = parent[key]
        return key

    keep = []
    for i, (e, (a, b)) in enumerate(zip(edge_of_row, ends_of_row)):
        ra, rb = find((e, a)), find((e, b))
        if ra != rb:
            parent[ra] = rb
            keep.append(i)
    keep = np.array(keep, dtype=np.int64)

    return PatchSystem(z, members, A, rhs1, rows, data, keep)


def _neumann_slot_value(ctx, patch, face, edge, tet, erule):
    """Flux of lambda_z (g_N - q x n) on one edge of a Neumann patch face."""
    mesh = ctx.mesh
    z = patch.center
    a, b = mesh.ent.edges[edge]
    pa = mesh.vertices[a]
    vec = ctx.edge_vec[edge]
    t = erule.points[:, 1]
    pts = pa[None, :] + t[:, None] * vec[None, :]
    n = mesh.ent.face_normals[face]
    gn = np.asarray(ctx.problem.g_N(pts, np.broadcast_to(n, pts.shape)))
    rot = gn - np.cross(ctx.q[tet], n)
    lam = 1.0 - t if a == z else t
    conormal = np.cross(vec, n)
    return float(np.einsum("q,q,qc,c->", erule.weights, lam, rot, conormal))


def solve_patch(system):
    """Saddle solve; reports the patch vertex on singular factorization."""
    try:
        sigma, _ = dense_saddle_solve(system.A, system.B, system.rhs1,
                                      system.rhs2)
    except SingularSystemError as exc:
        raise SingularSystemError(
            f"patch system of vertex {system.vertex} is singular: {exc}") from exc
    return sigma


def recover_local(mesh, u_field, problem, quad_degree=4):
    """Per-vertex hybrid recovery of the magnetizing-field correction.

    Solves the constrained patch minimization for every mesh vertex and
    returns the recovered field sigma_tilde = sum_z correction_z +
    mu^-1 curl u_T as a BrokenField (tangentially conforming up to
    roundoff by construction).
    """
    _check_same_mesh(mesh, u_field)
    ctx = _RecoveryContext(mesh, u_field, problem, quad_degree)
    acc = np.zeros((mesh.num_tets, 6))
    for z in range(mesh.num_vertices):
        patch = vertex_patch(mesh, z)
        system = build_patch_system(ctx, patch)
        sigma = solve_patch(system)
        acc[patch.tets] += sigma.reshape(-1, 6)

    # add the elementwise mu^-1 curl u_T, exactly representable in ND0
    qcirc = np.einsum("tc,tkc->tk", ctx.q, ctx.edge_vec[mesh.ent.tet_edges])
    return BrokenField(mesh, acc + qcirc)


def null_space_patch_solve(system):
    """Independent oracle: null-space method on the full constraint rows.

    Uses least squares for a particular solution and an SVD null-space
    basis, then minimizes the patch energy on the affine constraint set.
    Exists for verification only; the production path is the saddle solve.
    """
    C = system.rows_full
    d = system.data_full
    n = system.A.shape[0]
    if C.shape[0] == 0:
        return np.linalg.solve(system.A, system.rhs1)
    xp, *_ = np.linalg.lstsq(C, d, rcond=None)
    resid = np.linalg.norm(C @ xp - d)
    if resid > 1e-8 * max(1.0, np.linalg.norm(d)):
        raise SingularSystemError(
            f"patch constraints of vertex {system.vertex} are inconsistent")
    _, s, vt = np.linalg.svd(C, full_matrices=True)
    rank = int(np.sum(s > s.max(initial=0.0) * max(C.shape) * np.finfo(float).eps))
    Z = vt[rank:].T
    if Z.shape[1] == 0:
        return xp
    red = Z.T @ system.A @ Z
    rhs = Z.T @ (system.rhs1 - system.A @ xp)
    y = np.linalg.solve(red, rhs)
    return xp + Z @ y
