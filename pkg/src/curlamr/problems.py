"""Benchmark problem definitions: coefficients, exact fields, manufactured
loads and boundary data.

Both benchmarks are interface problems with checkerboard coefficients that
violate quasi-monotonicity.  The first adapts the Kellogg intersecting
interface construction to H(curl) on a slab; its solution is a gradient
field, singular along the z axis.  The second uses a globally smooth
solenoidal magnetizing field on the cube with coefficient jumps across all
three coordinate planes.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .mesh import DIRICHLET


@dataclass
class ProblemSpec:
    """Coefficients, exact solution and data of one benchmark instance.

    All field callables are vectorized over (N, 3) point arrays.  Boundary
    data callables additionally take the (N, 3) outward unit normals.
    mu/beta are keyed by integer subdomain label.
    """

    name: str
    variant: str
    domain_box: np.ndarray
    mu_by_label: dict
    beta_by_label: dict
    subdomain_classifier: object
    exact_u: object
    exact_curl_u: object
    exact_sigma: object
    exact_curl_sigma: object
    f: object
    div_f: object
    g_D: object
    g_N: object = None
    bc_classifier: object = None      # None: Dirichlet everywhere
    params: object = None
    # scalar potential with exact_u = grad(potential), when one exists;
    # essential edge circulations then evaluate exactly as potential
    # differences, which matters on edges touching a field singularity
    exact_u_potential: object = None
    # scalar potential with beta^-1 f = grad(potential); lets the auxiliary
    # load integrate bounded potential values instead of the singular
    # gradient (divergence theorem per element, in-plane parts by parts)
    aux_rhs_potential: object = None

    def __post_init__(self):
        if min(self.mu_by_label.values()) <= 0 or min(self.beta_by_label.values()) <= 0:
            raise ValueError("mu and beta must be bounded below by positive constants")

    def mu_per_tet(self, mesh):
        return _map_labels(self.mu_by_label, mesh.subdomains)

    def beta_per_tet(self, mesh):
        return _map_labels(self.beta_by_label, mesh.subdomains)

    @property
    def key(self):
        return f"{self.name}/{self.variant}"


def _map_labels(table, labels):
    out = np.empty(labels.shape[0])
    for lab, val in table.items():
        out[labels == lab] = val
    return out


@dataclass(frozen=True)
class Example1Params:
    """Kellogg-type sector construction constants.

    sigma_angle is the decimal printed in the source material (it equals
    -3*pi/4 to double precision) and is kept as the literal value.
    """

    gamma: float = 0.5
    R: float = 5.8284271247461907
    rho: float = np.pi / 4
    sigma_angle: float = -2.3561944901923448
    delta: float = 0.25


def _ex1_branch_tables(p):
    # phi(theta) = amp_i * cos(gamma * (theta - shift_i)) per quadrant
    amps = np.array([
        np.cos((np.pi / 2 - p.sigma_angle) * p.gamma),
        np.cos(p.rho * p.gamma),
        np.cos(p.sigma_angle * p.gamma),
        np.cos((np.pi / 2 - p.rho) * p.gamma),
    ])
    shifts = np.array([
        np.pi / 2 - p.rho,
        np.pi - p.sigma_angle,
        np.pi + p.rho,
        3 * np.pi / 2 + p.sigma_angle,
    ])
    return amps, shifts


def example1_phi(theta, params=None, branch=None):
    """Angular factor of the exact potential; branch forces one sector
    formula (0..3), used to evaluate one-sided limits at the interfaces."""
    p = params or Example1Params()
    amps, shifts = _ex1_branch_tables(p)
    theta = np.asarray(theta, dtype=np.float64)
    b = _ex1_sector(theta) if branch is None else np.full(theta.shape, branch)
    return amps[b] * np.cos(p.gamma * (theta - shifts[b]))


def example1_dphi(theta, params=None, branch=None):
    p = params or Example1Params()
    amps, shifts = _ex1_branch_tables(p)
    theta = np.asarray(theta, dtype=np.float64)
    b = _ex1_sector(theta) if branch is None else np.full(theta.shape, branch)
    return -amps[b] * p.gamma * np.sin(p.gamma * (theta - shifts[b]))


def _ex1_sector(theta):
    return np.minimum((theta / (np.pi / 2)).astype(np.int64), 3)


def example1_gradient(points, params=None, branch=None):
    """grad(r^gamma phi(theta)) with zero (flagged) value on the r=0 axis.

    Returns (values, on_axis_mask).
    """
    p = params or Example1Params()
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    x, y = pts[:, 0], pts[:, 1]
    r = np.hypot(x, y)
    on_axis = r == 0.0
    theta = np.mod(np.arctan2(y, x), 2 * np.pi)
    rsafe = np.where(on_axis, 1.0, r)
    phi = example1_phi(theta, p, branch)
    dphi = example1_dphi(theta, p, branch)
    rad = p.gamma * rsafe ** (p.gamma - 1) * phi
    ang = rsafe ** (p.gamma - 1) * dphi
    ct, st = np.cos(theta), np.sin(theta)
    out = np.column_stack([rad * ct - ang * st, rad * st + ang * ct,
                           np.zeros_like(rad)])
    out[on_axis] = 0.0
    return out, on_axis


def example1(variant="fdiv0", params=None):
    """Kellogg intersecting interface benchmark on (-1,1)^2 x (-delta,delta).

    fdiv0: mu = 1, beta = alpha, right-hand side in H(div).
    fnothdiv: mu = beta = 1, the same gradient solution but f = grad(psi)
    has a jumping normal component, so f is not in H(div).
    """
    p = params or Example1Params()
    if variant not in ("fdiv0", "fnothdiv"):
        raise ValueError(f"unknown example1 variant {variant!r}")
    box = np.array([(-1.0, 1.0), (-1.0, 1.0), (-p.delta, p.delta)])

    def classify(points):
        pts = np.atleast_2d(points)
        return (pts[:, 0] * pts[:, 1] > 0).astype(np.int64)

    alpha = {1: p.R, 0: 1.0}
    mu = {0: 1.0, 1: 1.0}
    beta = alpha if variant == "fdiv0" else {0: 1.0, 1: 1.0}

    def exact_u(points):
        return example1_gradient(points, p)[0]

    def potential(points):
        pts = np.atleast_2d(points)
        r = np.hypot(pts[:, 0], pts[:, 1])
        theta = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * np.pi)
        return r ** p.gamma * example1_phi(theta, p)

    def zero_vec(points):
        return np.zeros((np.atleast_2d(points).shape[0], 3))

    def beta_at(points):
        labs = classify(points)
        return np.where(labs == 1, beta[1], beta[0])

    def f(points):
        return beta_at(points)[:, None] * exact_u(points)

    def div_f(points):
        return np.zeros(np.atleast_2d(points).shape[0])

    def g_D(points, normals):
        return np.cross(exact_u(points), normals)

    return ProblemSpec(
        name="example1", variant=variant, domain_box=box,
        mu_by_label=mu, beta_by_label=beta,
        subdomain_classifier=classify,
        exact_u=exact_u, exact_curl_u=zero_vec,
        exact_sigma=zero_vec, exact_curl_sigma=zero_vec,
        f=f, div_f=div_f, g_D=g_D, g_N=None, bc_classifier=None, params=p,
        exact_u_potential=potential, aux_rhs_potential=potential)


def _ex2_v(points):
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    return np.column_stack([np.sin(np.pi * y * z), np.sin(np.pi * x * z),
                            np.sin(np.pi * x * y)])


def _ex2_curl_v(points):
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    pi = np.pi
    return np.column_stack([
        pi * x * np.cos(pi * x * y) - pi * x * np.cos(pi * x * z),
        pi * y * np.cos(pi * y * z) - pi * y * np.cos(pi * x * y),
        pi * z * np.cos(pi * x * z) - pi * z * np.cos(pi * y * z),
    ])


def _ex2_curl_curl_v(points):
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    pi2 = np.pi * np.pi
    return np.column_stack([
        pi2 * (y * y + z * z) * np.sin(np.pi * y * z),
        pi2 * (x * x + z * z) * np.sin(np.pi * x * z),
        pi2 * (x * x + y * y) * np.sin(np.pi * x * y),
    ])


def example2(variant="fdiv0", a=1e-3):
    """Solenoidal-field benchmark on (-1,1)^3 with checkerboard mu.

    The magnetizing field curl(v) is globally smooth; u = mu v jumps in its
    normal component only through mu.  fdiv0 keeps beta*mu = 1 so f stays
    divergence-free; fnothdiv makes beta*mu jump, pushing f out of H(div).
    """
    if a <= 0:
        raise ValueError("coefficient a must be positive")
    if variant not in ("fdiv0", "fnothdiv"):
        raise ValueError(f"unknown example2 variant {variant!r}")
    box = np.array([(-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)])

    def classify(points):
        pts = np.atleast_2d(points)
        return (pts[:, 0] * pts[:, 1] * pts[:, 2] > 0).astype(np.int64)

    mu = {1: a, 0: 1.0}
    if variant == "fdiv0":
        beta = {1: 1.0 / a, 0: 1.0}
    else:
        beta = {1: 1.0, 0: 1.0 / a}

    def mu_at(points):
        labs = classify(points)
        return np.where(labs == 1, mu[1], mu[0])

    def beta_at(points):
        labs = classify(points)
        return np.where(labs == 1, beta[1], beta[0])

    def exact_u(points):
        pts = np.atleast_2d(points)
        return mu_at(pts)[:, None] * _ex2_v(pts)

    def exact_curl_u(points):
        pts = np.atleast_2d(points)
        return mu_at(pts)[:, None] * _ex2_curl_v(pts)

    def exact_sigma(points):
        return _ex2_curl_v(np.atleast_2d(points))

    def exact_curl_sigma(points):
        return _ex2_curl_curl_v(np.atleast_2d(points))

    def f(points):
        pts = np.atleast_2d(points)
        bm = (beta_at(pts) * mu_at(pts))[:, None]
        return _ex2_curl_curl_v(pts) + bm * _ex2_v(pts)

    def div_f(points):
        return np.zeros(np.atleast_2d(points).shape[0])

    def g_D(points, normals):
        return np.cross(exact_u(points), normals)

    return ProblemSpec(
        name="example2", variant=variant, domain_box=box,
        mu_by_label=mu, beta_by_label=beta,
        subdomain_classifier=classify,
        exact_u=exact_u, exact_curl_u=exact_curl_u,
        exact_sigma=exact_sigma, exact_curl_sigma=exact_curl_sigma,
        f=f, div_f=div_f, g_D=g_D, g_N=None, bc_classifier=None,
        params={"a": a})


_REGISTRY = {
    "example1/fdiv0": lambda **kw: example1("fdiv0", **kw),
    "example1/fnothdiv": lambda **kw: example1("fnothdiv", **kw),
    "example2/fdiv0": lambda **kw: example2("fdiv0", **kw),
    "example2/fnothdiv": lambda **kw: example2("fnothdiv", **kw),
}


def get_problem(key, **kwargs):
    """Problem lookup by 'name/variant' string, as used in run configs."""
    if key not in _REGISTRY:
        raise KeyError(f"unknown problem {key!r}; choose from {sorted(_REGISTRY)}")
    return _REGISTRY[key](**kwargs)


def default_initial_mesh(problem, n=None):
    """Interface-aligned Kuhn mesh of the problem's box."""
    from .mesh import build_box_mesh

    if problem.name == "example1":
        n = n if n is not None else (4, 4, 1)
    else:
        n = n if n is not None else (4, 4, 4)
    return build_box_mesh(problem.domain_box, n,
                          classifier=problem.subdomain_classifier,
                          bc_classifier=problem.bc_classifier)
