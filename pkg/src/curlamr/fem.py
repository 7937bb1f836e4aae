"""Lowest-order first-kind Nedelec (Whitney edge) elements.

One degree of freedom per global edge: the signed circulation along the
low-to-high vertex orientation.  Per tet, basis function k lives on local
edge LOCAL_EDGES[k] and equals sign * (lam_a grad lam_b - lam_b grad lam_a),
so element coefficients in this basis are global circulations directly.
"""

from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .linalg import SparseSymMatrix, SolveConfig, pcg
from .mesh import DIRICHLET, NEUMANN, LOCAL_EDGES
from .quadrature import simplex_rule, triangle_rule, edge_rule


class WhitneyBasis:
    """Per-tet basis data: barycentric gradients, signed constant curls,
    and pointwise evaluation at barycentric coordinates."""

    def __init__(self, vertices, global_ids=None):
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        if global_ids is None:
            global_ids = np.arange(4)
        if abs(np.linalg.det(vertices[1:] - vertices[:1])) <= 1e-300:
            raise ValueError("degenerate tet with zero volume")
        tets = np.arange(4, dtype=np.int64).reshape(1, 4)
        grads, vols = kernels.tet_grads_vols(vertices, tets)
        self.grads = grads[0]
        self.volume = float(vols[0])
        gid = np.asarray(global_ids)
        self.signs = np.where(gid[LOCAL_EDGES[:, 0]] < gid[LOCAL_EDGES[:, 1]],
                              1.0, -1.0)
        self.curls = kernels.whitney_curls(grads, self.signs[None, :])[0]

    def eval(self, bary):
        """Basis values at barycentric points, shape (nq, 6, 3)."""
        bary = np.atleast_2d(bary)
        a = LOCAL_EDGES[:, 0]
        b = LOCAL_EDGES[:, 1]
        w = bary[:, a, None] * self.grads[b] - bary[:, b, None] * self.grads[a]
        return w * self.signs[None, :, None]


def whitney_basis(vertices, global_ids=None):
    """Whitney basis fields of one tet and their constant curls."""
    return WhitneyBasis(vertices, global_ids)


@dataclass
class EdgeSpace:
    """Edge DOF bookkeeping for one boundary-condition role.

    The primal (electric field) problem is essential on the Dirichlet
    part; the auxiliary magnetizing-field problem swaps the roles and is
    essential on the Neumann part.
    """

    mesh: object
    essential_part: str = "dirichlet"

    def __post_init__(self):
        on_d, on_n = self.mesh.edge_boundary_part()
        if self.essential_part == "dirichlet":
            self.constrained = on_d
        elif self.essential_part == "neumann":
            self.constrained = on_n
        else:
            raise ValueError("essential_part must be 'dirichlet' or 'neumann'")
        self.free = ~self.constrained

    @property
    def num_dofs(self):
        return self.mesh.num_edges

    @property
    def num_free(self):
        return int(self.free.sum())


class SolutionField:
    """Conforming Whitney field: an EdgeSpace plus one coefficient per edge."""

    def __init__(self, space, coefficients):
        self.space = space
        self.mesh = space.mesh
        self.coefficients = np.asarray(coefficients, dtype=np.float64)
        if self.coefficients.shape != (space.num_dofs,):
            raise ValueError("coefficient vector does not match DOF count")

    def tet_coefficients(self):
        """(T,6) circulations pulled onto element-local edge slots."""
        return self.coefficients[self.mesh.ent.tet_edges]

    def values(self, bary_points):
        grads, _, signs = _geometry(self.mesh)
        return kernels.field_values(grads, signs, self.tet_coefficients(),
                                    bary_points)

    def curls(self):
        grads, vols, signs = _geometry(self.mesh)
        curls = kernels.whitney_curls(grads, signs)
        return np.einsum("tk,tkc->tc", self.tet_coefficients(), curls)


def _geometry(mesh):
    """(grads, vols, signs), cached on the mesh (immutable after build)."""
    geom = getattr(mesh, "_geom", None)
    if geom is None:
        grads, vols = kernels.tet_grads_vols(mesh.vertices, mesh.tets)
        geom = (grads, vols, mesh.ent.tet_edge_signs)
        mesh._geom = geom
    return geom


def mesh_geometry(mesh):
    return _geometry(mesh)


def interpolate_edge(field, mesh, edges=None, degree=5):
    """Edge interpolant: Gauss approximation of the circulation along
    each listed edge (default all edges)."""
    if edges is None:
        edges = np.arange(mesh.num_edges)
    edges = np.asarray(edges, dtype=np.int64)
    rule = edge_rule(degree)
    a = mesh.vertices[mesh.ent.edges[edges, 0]]
    vec = mesh.edge_vectors[edges]
    t = rule.points[:, 1]
    pts = a[:, None, :] + t[None, :, None] * vec[:, None, :]
    vals = np.asarray(field(pts.reshape(-1, 3))).reshape(len(edges), -1, 3)
    return np.einsum("q,eqc,ec->e", rule.weights, vals, vec)


def _face_quadrature_in_tets(mesh, faces, side, rule):
    """Map a triangle rule onto faces, as barycentric coords of the
    adjacent tet on the given side (0 lower, 1 higher tet id).

    Returns (tet ids, tet-barycentric (F,nq,4), physical points (F,nq,3)).
    """
    faces = np.asarray(faces, dtype=np.int64)
    tids = mesh.ent.face_tets[faces, side]
    fverts = mesh.ent.faces[faces]                      # (F,3)
    tverts = mesh.tets[tids]                            # (F,4)
    local = np.argmax(fverts[:, :, None] == tverts[:, None, :], axis=2)
    nq = rule.npoints
    bary = np.zeros((faces.shape[0], nq, 4))
    rows = np.arange(faces.shape[0])[:, None, None]
    qidx = np.arange(nq)[None, :, None]
    bary[rows, qidx, local[:, None, :]] = rule.points[None, :, :]
    phys = np.einsum("qv,fvc->fqc", rule.points, mesh.vertices[fverts])
    return tids, bary, phys


def _whitney_values_per_row(grads, signs, coeffs, bary):
    """Field values for per-row barycentric points, (N, nq, 3)."""
    a = LOCAL_EDGES[:, 0]
    b = LOCAL_EDGES[:, 1]
    w = bary[:, :, a, None] * grads[:, None, b, :] \
        - bary[:, :, b, None] * grads[:, None, a, :]
    return np.einsum("nk,nqkc->nqc", coeffs * signs, w)


@dataclass
class AssembledSystem:
    matrix: SparseSymMatrix
    rhs: np.ndarray
    essential: np.ndarray   # values on constrained edges, zero elsewhere
    space: EdgeSpace


def _scatter(mesh, elem_mats, elem_rhs):
    te = mesh.ent.tet_edges
    ntet = te.shape[0]
    rows = np.repeat(te, 6, axis=1).ravel()
    cols = np.tile(te, (1, 6)).ravel()
    A = SparseSymMatrix.from_coo(mesh.num_edges, rows, cols,
                                 np.swapaxes(elem_mats, 1, 2).ravel())
    b = np.zeros(mesh.num_edges)
    np.add.at(b, te.ravel(), elem_rhs.ravel())
    return A, b


def _boundary_load(mesh, tag, data, degree, sign=1.0):
    """Accumulate sign * <data(x, n), W_i> over boundary faces with the tag."""
    out = np.zeros(mesh.num_edges)
    bidx = mesh.boundary_faces
    faces = bidx[mesh.boundary_tags[bidx] == tag]
    if faces.size == 0:
        return out
    rule = triangle_rule(degree)
    grads, _, signs = _geometry(mesh)
    tids, bary, phys = _face_quadrature_in_tets(mesh, faces, 0, rule)
    normals = mesh.ent.face_normals[faces]
    nq = rule.npoints
    vals = np.asarray(data(phys.reshape(-1, 3),
                           np.repeat(normals, nq, axis=0))).reshape(-1, nq, 3)
    a = LOCAL_EDGES[:, 0]
    b = LOCAL_EDGES[:, 1]
    g = grads[tids]
    w = bary[:, :, a, None] * g[:, None, b, :] - bary[:, :, b, None] * g[:, None, a, :]
    w *= signs[tids][:, None, :, None]
    contrib = np.einsum("q,fqkc,fqc->fk", rule.weights, w, vals)
    contrib *= (2.0 * mesh.face_areas[faces] * sign)[:, None]
    np.add.at(out, mesh.ent.tet_edges[tids], contrib)
    return out


def _check_coefficients(mu, beta):
    if np.any(mu <= 0) or np.any(beta <= 0):
        raise ValueError("mu and beta must be bounded below by positive constants")


def assemble_primal(mesh, problem, quad_degree=4, face_degree=4, edge_degree=5):
    """Stiffness mu^-1 curl-curl + beta mass, volume load (f, W_i), Neumann
    load on the Dirichlet-essential space."""
    mu = problem.mu_per_tet(mesh)
    beta = problem.beta_per_tet(mesh)
    _check_coefficients(mu, beta)
    grads, vols, signs = _geometry(mesh)
    rule = simplex_rule(quad_degree)
    mats = kernels.element_matrices(grads, vols, signs, 1.0 / mu, beta,
                                    rule.points, rule.weights)
    phys = np.einsum("qv,tvc->tqc", rule.points, mesh.vertices[mesh.tets])
    fvals = np.asarray(problem.f(phys.reshape(-1, 3))).reshape(mesh.num_tets, -1, 3)
    erhs = kernels.rhs_dot_basis(grads, vols, signs, rule.points, rule.weights,
                                 fvals, np.ones(mesh.num_tets))
    A, b = _scatter(mesh, mats, erhs)
    if problem.g_N is not None:
        b += _boundary_load(mesh, NEUMANN, problem.g_N, face_degree)

    space = EdgeSpace(mesh, "dirichlet")
    essential = np.zeros(mesh.num_edges)
    cons = np.flatnonzero(space.constrained)
    if cons.size:
        pot = getattr(problem, "exact_u_potential", None)
        if pot is not None:
            # circulation of a gradient field is the potential difference;
            # exact even on edges touching a field singularity
            ends = mesh.ent.edges[cons]
            essential[cons] = (np.asarray(pot(mesh.vertices[ends[:, 1]]))
                               - np.asarray(pot(mesh.vertices[ends[:, 0]])))
        else:
            essential[cons] = interpolate_edge(problem.exact_u, mesh, cons,
                                               edge_degree)
    return AssembledSystem(A, b, essential, space)


def assemble_auxiliary(mesh, problem, quad_degree=4, face_degree=4, edge_degree=5):
    """Swapped-role system for the magnetizing field: beta^-1 curl-curl +
    mu mass, load (beta^-1 f, curl W_i) - <g_D, W_i> on Gamma_D, essential
    DOFs on the Neumann part.

    When the problem supplies aux_rhs_potential (beta^-1 f = grad phi), the
    load integrates the bounded potential instead of its possibly singular
    gradient: the volume term becomes element-boundary integrals of phi by
    the divergence theorem, the Dirichlet pairing becomes in-plane boundary
    and face integrals of phi.
    """
    mu = problem.mu_per_tet(mesh)
    beta = problem.beta_per_tet(mesh)
    _check_coefficients(mu, beta)
    grads, vols, signs = _geometry(mesh)
    rule = simplex_rule(quad_degree)
    mats = kernels.element_matrices(grads, vols, signs, 1.0 / beta, mu,
                                    rule.points, rule.weights)
    curls = kernels.whitney_curls(grads, signs)
    pot = getattr(problem, "aux_rhs_potential", None)
    if pot is None:
        phys = np.einsum("qv,tvc->tqc", rule.points, mesh.vertices[mesh.tets])
        fvals = np.asarray(problem.f(phys.reshape(-1, 3))).reshape(
            mesh.num_tets, -1, 3)
        fint = kernels.integrate_vec(vols, rule.weights, fvals)     # (T,3)
        erhs = np.einsum("tc,tkc->tk", fint / beta[:, None], curls)
    else:
        gradint = _gradient_integrals(mesh, pot, face_degree)
        erhs = np.einsum("tc,tkc->tk", gradint, curls)
    A, b = _scatter(mesh, mats, erhs)
    if pot is None:
        b -= _boundary_load(mesh, DIRICHLET, problem.g_D, face_degree)
    else:
        b -= _dirichlet_pair_from_potential(mesh, pot, face_degree,
                                            max(edge_degree, 8))

    space = EdgeSpace(mesh, "neumann")
    essential = np.zeros(mesh.num_edges)
    cons = np.flatnonzero(space.constrained)
    if cons.size:
        essential[cons] = interpolate_edge(problem.exact_sigma, mesh, cons,
                                           edge_degree)
    return AssembledSystem(A, b, essential, space)


def _gradient_integrals(mesh, pot, face_degree):
    """int_K grad(phi) dx = boundary integral of phi n over each tet."""
    rule = triangle_rule(face_degree)
    faces = np.arange(mesh.num_faces)
    fverts = mesh.ent.faces[faces]
    phys = np.einsum("qv,fvc->fqc", rule.points, mesh.vertices[fverts])
    vals = np.asarray(pot(phys.reshape(-1, 3))).reshape(mesh.num_faces, -1)
    face_int = 2.0 * mesh.face_areas * (rule.weights @ vals.T)   # int_F phi
    tf = mesh.ent.tet_faces
    own = mesh.ent.face_tets[tf, 0] == np.arange(mesh.num_tets)[:, None]
    sign = np.where(own, 1.0, -1.0)                              # outward of K
    return np.einsum("ti,ti,tic->tc", sign, face_int[tf],
                     mesh.ent.face_normals[tf])


def _dirichlet_pair_from_potential(mesh, pot, face_degree, edge_degree):
    """<g_D, W_i> over Gamma_D for g_D = grad(phi) x n, using the in-plane
    integration by parts
        int_F (grad phi x n).tau
          = -sum_{e in dF} int_e phi (tau x n).nu ds + (curl tau . n) int_F phi
    with nu the outward in-plane conormal; all integrands are bounded."""
    out = np.zeros(mesh.num_edges)
    bidx = mesh.boundary_faces
    faces = bidx[mesh.boundary_tags[bidx] == DIRICHLET]
    if faces.size == 0:
        return out
    grads, _, signs = _geometry(mesh)
    curls = kernels.whitney_curls(grads, signs)
    frule = triangle_rule(face_degree)
    erule = edge_rule(edge_degree)

    tids = mesh.ent.face_tets[faces, 0]
    nrm = mesh.ent.face_normals[faces]
    fverts = mesh.ent.faces[faces]

    # int_F phi
    phys = np.einsum("qv,fvc->fqc", frule.points, mesh.vertices[fverts])
    vals = np.asarray(pot(phys.reshape(-1, 3))).reshape(faces.shape[0], -1)
    face_int = 2.0 * mesh.face_areas[faces] * (frule.weights @ vals.T)
    contrib = np.einsum("fkc,fc,f->fk", curls[tids], nrm, face_int)

    # edge midpoints in tet barycentric, conormal signs, int_e phi
    fedges = mesh.ent.face_edges[faces]                      # (F,3)
    ends = mesh.ent.edges[fedges]                            # (F,3,2)
    pa = mesh.vertices[ends[..., 0]]
    vec = mesh.edge_vectors[fedges]                          # (F,3,3)
    centroid = mesh.vertices[fverts].mean(axis=1)
    conormal = np.cross(vec, nrm[:, None, :])                # |e| * (t x n)
    mid = pa + 0.5 * vec
    outward = np.einsum("fec,fec->fe", conormal, mid - centroid[:, None, :]) < 0
    conormal[outward] *= -1.0

    t = erule.points[:, 1]
    pts = pa[:, :, None, :] + t[None, None, :, None] * vec[:, :, None, :]
    pvals = np.asarray(pot(pts.reshape(-1, 3))).reshape(faces.shape[0], 3, -1)
    edge_int = pvals @ erule.weights                          # int phi dtau

    # constant (W_k x n).nu along each edge, from the midpoint value
    tverts = mesh.tets[tids]
    local = np.argmax(ends[:, :, :, None] == tverts[:, None, None, :], axis=3)
    bary = np.zeros((faces.shape[0], 3, 4))
    rows = np.arange(faces.shape[0])[:, None]
    eidx = np.arange(3)[None, :]
    bary[rows, eidx, local[:, :, 0]] += 0.5
    bary[rows, eidx, local[:, :, 1]] += 0.5
    wmid = _whitney_basis_per_row(grads[tids], signs[tids], bary)  # (F,3,6,3)
    q = np.einsum("fekc,fec->fek", np.cross(wmid, nrm[:, None, None, :]),
                  conormal)
    contrib -= np.einsum("fek,fe->fk", q, edge_int)

    np.add.at(out, mesh.ent.tet_edges[tids], contrib)
    return out


def _whitney_basis_per_row(grads, signs, bary):
    """Basis values for per-row barycentric points, (N, nq, 6, 3)."""
    a = LOCAL_EDGES[:, 0]
    b = LOCAL_EDGES[:, 1]
    w = bary[:, :, a, None] * grads[:, None, b, :] \
        - bary[:, :, b, None] * grads[:, None, a, :]
    return w * signs[:, None, :, None]


def solve_system(system, config=None, x0=None):
    """Reduce to free DOFs, run PCG, scatter back the essential values.

    Returns (SolutionField, iterations, relative residual).
    """
    config = config or SolveConfig()
    space = system.space
    free = space.free
    x_full = system.essential.copy()
    rhs = system.rhs - system.matrix.matvec(x_full)
    Aff = system.matrix.submatrix(free)
    x0f = None if x0 is None else np.asarray(x0)[free]
    xf, iters, relres = pcg(Aff, rhs[free], config, x0f)
    x_full[free] = xf
    return SolutionField(space, x_full), iters, relres


def energy_error(mesh, field, exact_u, exact_curl_u, mu, beta, quad_degree=4):
    """Elementwise and global energy-norm distance
    ( mu^-1 |curl(u - u_h)|^2 + beta |u - u_h|^2 )^(1/2).

    exact_u/exact_curl_u are callables on (N,3) points; pass None for a
    zero field.  Returns (per_element, global).
    """
    grads, vols, signs = _geometry(mesh)
    rule = simplex_rule(quad_degree)
    phys = np.einsum("qv,tvc->tqc", rule.points, mesh.vertices[mesh.tets])
    flat = phys.reshape(-1, 3)
    nq = rule.npoints

    if field is not None:
        coeffs = field.tet_coefficients()
        uh = kernels.field_values(grads, signs, coeffs, rule.points)
        curls = kernels.whitney_curls(grads, signs)
        ch = np.einsum("tk,tkc->tc", coeffs, curls)
    else:
        uh = np.zeros((mesh.num_tets, nq, 3))
        ch = np.zeros((mesh.num_tets, 3))

    du = -uh if exact_u is None \
        else np.asarray(exact_u(flat)).reshape(mesh.num_tets, nq, 3) - uh
    dc = np.broadcast_to(-ch[:, None, :], (mesh.num_tets, nq, 3)).copy() \
        if exact_curl_u is None \
        else np.asarray(exact_curl_u(flat)).reshape(mesh.num_tets, nq, 3) - ch[:, None, :]

    per = kernels.weighted_norm2(vols, rule.weights, beta, du)
    per += kernels.weighted_norm2(vols, rule.weights, 1.0 / mu, dc)
    return np.sqrt(per), float(np.sqrt(per.sum()))


def energy_norm_exact(mesh, exact_u, exact_curl_u, mu, beta, quad_degree=4):
    """Energy norm of an exact (callable) field via quadrature."""
    _, total = energy_error(mesh, None, exact_u, exact_curl_u, mu, beta,
                            quad_degree)
    return total


def galerkin_residual(system, field):
    """Max |(b - A x)_i| over free DOFs, relative to rhs scale."""
    r = system.rhs - system.matrix.matvec(field.coefficients)
    scale = np.linalg.norm(system.rhs[system.space.free])
    if scale == 0:
        return float(np.abs(r[system.space.free]).max(initial=0.0))
    return float(np.abs(r[system.space.free]).max(initial=0.0) / scale)
