"""Conforming tetrahedral meshes with full entity topology and
marked-edge bisection refinement.

Conventions fixed here and relied on everywhere else:
  * global edges run from the lower to the higher vertex index;
  * interior face normals point from the lower- to the higher-indexed
    adjacent tet, boundary normals point out of the domain;
  * subdomain labels and boundary tags are inherited under refinement,
    so interfaces aligned with the initial mesh never cut an element.

Refinement is Maubach's tagged bisection.  Kuhn (6-tets-per-cube) boxes
are generated with the vertex path ordering and tag 3, which makes the
initial refinement edge the cell diagonal (the longest edge) and keeps
recursive conformity closure finite with uniformly bounded shape
regularity.
"""

from dataclasses import dataclass, field

import numpy as np

DIRICHLET = 0
NEUMANN = 1

# local edge k connects local vertices LOCAL_EDGES[k]
LOCAL_EDGES = np.array([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
# local face i is opposite local vertex i
LOCAL_FACES = np.array([(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)])

_CLOSURE_ROUND_CAP = 500


class NonManifoldError(ValueError):
    pass


@dataclass
class EntityTables:
    edges: np.ndarray          # (E,2) lo<hi vertex ids
    faces: np.ndarray          # (F,3) sorted vertex triples
    tet_edges: np.ndarray      # (T,6) edge ids per LOCAL_EDGES
    tet_edge_signs: np.ndarray  # (T,6) +-1, +1 if local direction == global
    tet_faces: np.ndarray      # (T,4) face ids per LOCAL_FACES
    face_tets: np.ndarray      # (F,2) adjacent tets ascending, -1 if boundary
    face_normals: np.ndarray   # (F,3) unit, lower tet -> higher tet / outward
    face_edges: np.ndarray     # (F,3) edge ids (v0v1, v0v2, v1v2)


def tet_volumes(vertices, tets):
    """Signed volumes; positive for positively oriented tets."""
    v = vertices[tets]
    return np.linalg.det(v[:, 1:] - v[:, :1]) / 6.0


def derive_entities(tets, vertices):
    """Build unique edge/face tables with incidence and orientation signs.

    Raises NonManifoldError if some face has more than two adjacent tets.
    """
    tets = np.asarray(tets, dtype=np.int64)
    nv = int(vertices.shape[0])
    ntet = tets.shape[0]

    pairs = tets[:, LOCAL_EDGES]               # (T,6,2)
    lo = pairs.min(axis=2)
    hi = pairs.max(axis=2)
    ekeys = lo.astype(np.int64) * nv + hi
    uniq_e, inv_e = np.unique(ekeys.ravel(), return_inverse=True)
    edges = np.column_stack([uniq_e // nv, uniq_e % nv])
    tet_edges = inv_e.reshape(ntet, 6)
    tet_edge_signs = np.where(pairs[:, :, 0] < pairs[:, :, 1], 1.0, -1.0)

    triples = np.sort(tets[:, LOCAL_FACES], axis=2)   # (T,4,3)
    fkeys = (triples[:, :, 0].astype(np.int64) * nv + triples[:, :, 1]) * nv \
        + triples[:, :, 2]
    uniq_f, inv_f = np.unique(fkeys.ravel(), return_inverse=True)
    nf = uniq_f.shape[0]
    tet_faces = inv_f.reshape(ntet, 4)

    counts = np.bincount(inv_f.ravel(), minlength=nf)
    if counts.max(initial=0) > 2:
        raise NonManifoldError("face shared by more than two tets")

    faces = np.empty((nf, 3), dtype=np.int64)
    rest, c = np.divmod(uniq_f, nv)
    a, b = np.divmod(rest, nv)
    faces[:, 0], faces[:, 1], faces[:, 2] = a, b, c

    face_tets = np.full((nf, 2), -1, dtype=np.int64)
    order = np.argsort(inv_f.ravel(), kind="stable")
    tet_of_slot = order // 4
    fid_sorted = inv_f.ravel()[order]
    starts = np.searchsorted(fid_sorted, np.arange(nf))
    face_tets[:, 0] = tet_of_slot[starts]
    second = counts == 2
    face_tets[second, 1] = tet_of_slot[starts[second] + 1]
    # ascending tet ids per face
    swap = second & (face_tets[:, 0] > face_tets[:, 1])
    face_tets[swap] = face_tets[swap][:, ::-1]

    # normal from the lower-indexed tet's side, pointing away from it
    va = vertices[faces[:, 0]]
    nrm = np.cross(vertices[faces[:, 1]] - va, vertices[faces[:, 2]] - va)
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    owner = face_tets[:, 0]
    centroid_f = vertices[faces].mean(axis=1)
    centroid_t = vertices[tets[owner]].mean(axis=1)
    flip = np.einsum("ij,ij->i", nrm, centroid_f - centroid_t) < 0
    nrm[flip] *= -1.0

    ekey_of = lambda p, q: np.minimum(p, q).astype(np.int64) * nv + np.maximum(p, q)
    fe = np.empty((nf, 3), dtype=np.int64)
    fe[:, 0] = np.searchsorted(uniq_e, ekey_of(faces[:, 0], faces[:, 1]))
    fe[:, 1] = np.searchsorted(uniq_e, ekey_of(faces[:, 0], faces[:, 2]))
    fe[:, 2] = np.searchsorted(uniq_e, ekey_of(faces[:, 1], faces[:, 2]))

    return EntityTables(edges, faces, tet_edges, tet_edge_signs, tet_faces,
                        face_tets, nrm, fe)


@dataclass
class TetMesh:
    """Immutable-after-construction conforming tetrahedral mesh.

    ``tets`` rows are stored positively oriented.  ``ref_verts``/``ref_tags``
    carry the Maubach bisection state: the refinement edge of tet t is
    (ref_verts[t, 0], ref_verts[t, ref_tags[t]]).
    """

    vertices: np.ndarray
    tets: np.ndarray
    subdomains: np.ndarray
    ref_verts: np.ndarray
    ref_tags: np.ndarray
    boundary_tags: np.ndarray = None  # (F,) -1 interior else DIRICHLET/NEUMANN
    ent: EntityTables = None
    volumes: np.ndarray = None
    h_tet: np.ndarray = None
    h_face: np.ndarray = None
    face_areas: np.ndarray = None
    edge_lengths: np.ndarray = None
    edge_vectors: np.ndarray = None
    _vertex_tets: tuple = field(default=None, repr=False)

    def __init__(self, vertices, tets, subdomains=None, ref_verts=None,
                 ref_tags=None, bc_face_tags=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        tets = np.asarray(tets, dtype=np.int64).copy()
        if tets.ndim != 2 or tets.shape[1] != 4 or tets.shape[0] == 0:
            raise ValueError("tets must be a nonempty (T,4) array")
        vols = tet_volumes(self.vertices, tets)
        neg = vols < 0
        tets[neg] = tets[neg][:, [0, 1, 3, 2]]
        vols = np.abs(vols)
        if np.any(vols <= 0):
            raise ValueError("degenerate tet with zero volume")
        self.tets = tets
        self.volumes = vols

        ntet = tets.shape[0]
        if subdomains is None:
            subdomains = np.zeros(ntet, dtype=np.int64)
        self.subdomains = np.asarray(subdomains, dtype=np.int64)

        if ref_verts is None:
            ref_verts, ref_tags = _longest_edge_init(self.vertices, tets)
        self.ref_verts = np.asarray(ref_verts, dtype=np.int64)
        self.ref_tags = np.asarray(ref_tags, dtype=np.int64)

        self.ent = derive_entities(tets, self.vertices)
        ev = self.vertices[self.ent.edges[:, 1]] - self.vertices[self.ent.edges[:, 0]]
        self.edge_vectors = ev
        self.edge_lengths = np.linalg.norm(ev, axis=1)
        fv = self.vertices[self.ent.faces]
        self.face_areas = 0.5 * np.linalg.norm(
            np.cross(fv[:, 1] - fv[:, 0], fv[:, 2] - fv[:, 0]), axis=1)
        self.h_tet = self.edge_lengths[self.ent.tet_edges].max(axis=1)
        self.h_face = np.maximum(
            np.maximum(np.linalg.norm(fv[:, 1] - fv[:, 0], axis=1),
                       np.linalg.norm(fv[:, 2] - fv[:, 0], axis=1)),
            np.linalg.norm(fv[:, 2] - fv[:, 1], axis=1))

        nf = self.ent.faces.shape[0]
        tags = np.full(nf, -1, dtype=np.int64)
        bidx = np.flatnonzero(self.ent.face_tets[:, 1] < 0)
        if bc_face_tags is None:
            tags[bidx] = DIRICHLET
        elif callable(bc_face_tags):
            tags[bidx] = bc_face_tags(self.vertices[self.ent.faces[bidx]].mean(axis=1))
        else:
            for f in bidx:
                key = tuple(self.ent.faces[f])
                if key not in bc_face_tags:
                    raise ValueError(f"missing boundary tag for face {key}")
                tags[f] = bc_face_tags[key]
        self.boundary_tags = tags
        self._vertex_tets = None

    # -- simple queries ------------------------------------------------

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_tets(self):
        return self.tets.shape[0]

    @property
    def num_edges(self):
        return self.ent.edges.shape[0]

    @property
    def num_faces(self):
        return self.ent.faces.shape[0]

    @property
    def boundary_faces(self):
        return np.flatnonzero(self.ent.face_tets[:, 1] < 0)

    @property
    def interior_faces(self):
        return np.flatnonzero(self.ent.face_tets[:, 1] >= 0)

    def refinement_edge(self, t):
        rv = self.ref_verts[t]
        a, b = rv[0], rv[self.ref_tags[t]]
        return (min(a, b), max(a, b))

    def vertex_tets(self, z):
        """Tets having z as a vertex (CSR incidence, built lazily)."""
        if self._vertex_tets is None:
            flat = self.tets.ravel()
            order = np.argsort(flat, kind="stable")
            indptr = np.searchsorted(flat[order], np.arange(self.num_vertices + 1))
            self._vertex_tets = (indptr, order // 4)
        indptr, data = self._vertex_tets
        return data[indptr[z]:indptr[z + 1]]

    def edge_boundary_part(self):
        """Per-edge booleans (on_dirichlet, on_neumann).

        An edge is on a boundary part if it is an edge of some boundary
        face carrying that tag.
        """
        on_d = np.zeros(self.num_edges, dtype=bool)
        on_n = np.zeros(self.num_edges, dtype=bool)
        b = self.boundary_faces
        fe = self.ent.face_edges[b]
        tags = self.boundary_tags[b]
        on_d[fe[tags == DIRICHLET].ravel()] = True
        on_n[fe[tags == NEUMANN].ravel()] = True
        return on_d, on_n


def _longest_edge_init(vertices, tets):
    """Default refinement state: longest edge between positions 0 and 3."""
    ntet = tets.shape[0]
    ref_verts = np.empty((ntet, 4), dtype=np.int64)
    ref_tags = np.full(ntet, 3, dtype=np.int64)
    pts = vertices[tets]
    for t in range(ntet):
        lens = [np.linalg.norm(pts[t, a] - pts[t, b]) for a, b in LOCAL_EDGES]
        a, b = LOCAL_EDGES[int(np.argmax(lens))]
        rest = [i for i in range(4) if i not in (a, b)]
        ref_verts[t] = tets[t, [a, rest[0], rest[1], b]]
    return ref_verts, ref_tags


def build_box_mesh(box, n, classifier=None, bc_classifier=None):
    """Kuhn triangulation of an axis-aligned box.

    box: ((x0,x1),(y0,y1),(z0,z1)); n: subdivisions per axis (int or triple).
    classifier maps (N,3) cell centroids to integer subdomain labels and
    must be constant on every grid cell; bc_classifier maps boundary face
    centroids to DIRICHLET/NEUMANN.
    """
    box = np.asarray(box, dtype=np.float64)
    if box.shape != (3, 2) or np.any(box[:, 1] <= box[:, 0]):
        raise ValueError("box must be ((x0,x1),(y0,y1),(z0,z1)) with positive extents")
    if np.isscalar(n):
        n = (n, n, n)
    nx, ny, nz = (int(v) for v in n)
    if min(nx, ny, nz) < 1:
        raise ValueError("subdivisions must be at least 1 per axis")

    xs = [np.linspace(box[i, 0], box[i, 1], (nx, ny, nz)[i] + 1) for i in range(3)]
    X, Y, Z = np.meshgrid(*xs, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def vid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    tets = []
    cell_of = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                base = np.array([i, j, k])
                for p in perms:
                    steps = [base.copy()]
                    for ax in p:
                        nxt = steps[-1].copy()
                        nxt[ax] += 1
                        steps.append(nxt)
                    tets.append([vid(*s) for s in steps])
                    cell_of.append((i, j, k))
    tets = np.array(tets, dtype=np.int64)

    centroids = vertices[tets].mean(axis=1)
    if classifier is None:
        labels = np.zeros(tets.shape[0], dtype=np.int64)
    else:
        labels = np.asarray(classifier(centroids), dtype=np.int64)
        # all 6 tets of a cell must agree, otherwise an interface cuts cells
        per_cell = labels.reshape(-1, 6)
        if np.any(per_cell != per_cell[:, :1]):
            raise ValueError(
                "classifier assigns multiple subdomains within one grid cell; "
                "align interfaces with grid planes")

    # path ordering is the Maubach order; tag 3 selects the cell diagonal,
    # which is also the longest edge
    return TetMesh(vertices, tets, subdomains=labels, ref_verts=tets.copy(),
                   ref_tags=np.full(tets.shape[0], 3, dtype=np.int64),
                   bc_face_tags=bc_classifier)


def _maubach_children(x, d):
    """Children orders and tags for tagged simplex (x, d), n = 3."""
    x0, x1, x2, x3 = x
    if d == 3:
        c1 = (x0, x1, x2, -1)
        c2 = (x1, x2, x3, -1)
    elif d == 2:
        c1 = (x0, x1, -1, x3)
        c2 = (x1, x2, -1, x3)
    else:  # d == 1
        c1 = (x0, -1, x2, x3)
        c2 = (x1, -1, x2, x3)
    nd = d - 1 if d > 1 else 3
    return c1, c2, nd


def bisect(mesh, marked):
    """Bisect the marked tets and recursively restore conformity.

    Returns a new TetMesh; the input is untouched.  Children inherit the
    parent subdomain label, split boundary faces inherit the parent tag.
    """
    marked = np.asarray(sorted(set(int(m) for m in np.atleast_1d(marked))), dtype=np.int64) \
        if len(marked) else np.empty(0, dtype=np.int64)
    if marked.size == 0:
        return mesh
    if marked.min() < 0 or marked.max() >= mesh.num_tets:
        raise ValueError("marked tet id out of range")

    verts = [tuple(p) for p in mesh.vertices]
    tet_v = [tuple(r) for r in mesh.ref_verts]
    tags = list(mesh.ref_tags)
    labels = list(mesh.subdomains)
    alive = [True] * mesh.num_tets

    face_tag = {}
    for f in mesh.boundary_faces:
        face_tag[tuple(mesh.ent.faces[f])] = int(mesh.boundary_tags[f])

    midpoint = {}

    def get_midpoint(a, b):
        key = (a, b) if a < b else (b, a)
        m = midpoint.get(key)
        if m is None:
            pa, pb = verts[key[0]], verts[key[1]]
            verts.append(((pa[0] + pb[0]) / 2, (pa[1] + pb[1]) / 2,
                          (pa[2] + pb[2]) / 2))
            m = len(verts) - 1
            midpoint[key] = m
        return m

    def split_boundary_faces(x, d, m):
        # the two faces of the tet containing the refinement edge are
        # (x0, xd, y) for the two remaining vertices y
        x0, xd = x[0], x[d]
        others = [x[i] for i in range(4) if i != 0 and i != d]
        for y in others:
            key = tuple(sorted((x0, xd, y)))
            tag = face_tag.pop(key, None)
            if tag is not None:
                face_tag[tuple(sorted((x0, m, y)))] = tag
                face_tag[tuple(sorted((xd, m, y)))] = tag

    def bisect_tet(i):
        x, d = tet_v[i], tags[i]
        m = get_midpoint(x[0], x[d])
        split_boundary_faces(x, d, m)
        c1, c2, nd = _maubach_children(x, d)
        c1 = tuple(m if v == -1 else v for v in c1)
        c2 = tuple(m if v == -1 else v for v in c2)
        alive[i] = False
        for c in (c1, c2):
            tet_v.append(c)
            tags.append(nd)
            labels.append(labels[i])
            alive.append(True)

    for i in marked:
        bisect_tet(int(i))

    # conformity closure: any live tet with a bisected edge is refined
    # through its own refinement edge until no hanging midpoints remain
    for _ in range(_CLOSURE_ROUND_CAP):
        pending = []
        for i in range(len(tet_v)):
            if not alive[i]:
                continue
            x = tet_v[i]
            for a in range(4):
                va = x[a]
                hit = False
                for b in range(a + 1, 4):
                    vb = x[b]
                    key = (va, vb) if va < vb else (vb, va)
                    if key in midpoint:
                        pending.append(i)
                        hit = True
                        break
                if hit:
                    break
        if not pending:
            break
        for i in pending:
            if alive[i]:
                bisect_tet(i)
    else:
        raise RuntimeError("bisection closure did not terminate; "
                           "inconsistent refinement marks")

    keep = [i for i in range(len(tet_v)) if alive[i]]
    new_vertices = np.array(verts)
    new_ref = np.array([tet_v[i] for i in keep], dtype=np.int64)
    new_tags = np.array([tags[i] for i in keep], dtype=np.int64)
    new_labels = np.array([labels[i] for i in keep], dtype=np.int64)

    out = TetMesh(new_vertices, new_ref.copy(), subdomains=new_labels,
                  ref_verts=new_ref, ref_tags=new_tags,
                  bc_face_tags=None)
    # re-tag boundary faces from the inheritance map
    tags_arr = np.full(out.num_faces, -1, dtype=np.int64)
    for f in out.boundary_faces:
        key = tuple(out.ent.faces[f])
        if key not in face_tag:
            raise RuntimeError("boundary face lost its tag during refinement")
        tags_arr[f] = face_tag[key]
    out.boundary_tags = tags_arr
    return out


@dataclass
class VertexPatch:
    """Star of tets around a vertex with classified patch-boundary faces.

    interior_faces are the faces strictly inside the patch (they contain
    the center vertex and two member tets).  boundary faces are split by
    kind: 0 = interior to the domain, 1 = Dirichlet part, 2 = Neumann part.
    """

    center: int
    tets: np.ndarray
    interior_faces: np.ndarray
    boundary_faces: np.ndarray
    boundary_kinds: np.ndarray
    hat_index: np.ndarray  # local index of center in each member tet

    KIND_INTERIOR = 0
    KIND_DIRICHLET = 1
    KIND_NEUMANN = 2


def vertex_patch(mesh, z):
    """Assemble the vertex patch of z."""
    members = mesh.vertex_tets(int(z))
    members = np.sort(members)
    memberset = set(int(t) for t in members)
    seen = set()
    interior = []
    boundary = []
    kinds = []
    for t in members:
        for f in mesh.ent.tet_faces[t]:
            f = int(f)
            if f in seen:
                continue
            seen.add(f)
            t1, t2 = mesh.ent.face_tets[f]
            has_z = z in mesh.ent.faces[f]
            if has_z and t2 >= 0:
                # both neighbours contain z, hence both are members
                interior.append(f)
            else:
                if t2 < 0:
                    tag = mesh.boundary_tags[f]
                    kinds.append(VertexPatch.KIND_DIRICHLET if tag == DIRICHLET
                                 else VertexPatch.KIND_NEUMANN)
                else:
                    kinds.append(VertexPatch.KIND_INTERIOR)
                boundary.append(f)
    hat = np.array([int(np.where(mesh.tets[t] == z)[0][0]) for t in members],
                   dtype=np.int64)
    return VertexPatch(int(z), members, np.array(interior, dtype=np.int64),
                       np.array(boundary, dtype=np.int64),
                       np.array(kinds, dtype=np.int64), hat)


def min_dihedral_angle(mesh):
    """Smallest dihedral angle over all tets, in radians."""
    v = mesh.vertices[mesh.tets]
    worst = np.inf
    # inward normal of face opposite local vertex i
    normals = np.empty((mesh.num_tets, 4, 3))
    for i, (a, b, c) in enumerate(LOCAL_FACES):
        n = np.cross(v[:, b] - v[:, a], v[:, c] - v[:, a])
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        toward = np.einsum("ij,ij->i", n, v[:, i] - v[:, a])
        n[toward < 0] *= -1
        normals[:, i] = n
    for i in range(4):
        for j in range(i + 1, 4):
            cosang = np.einsum("ij,ij->i", normals[:, i], normals[:, j])
            ang = np.pi - np.arccos(np.clip(cosang, -1.0, 1.0))
            worst = min(worst, ang.min())
    return worst
