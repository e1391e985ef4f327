"""Discrete surfaces: quadrature nodes, weights, and outward normals.

Two structured geometries (sphere and spheroid of revolution) use a
Gauss-Legendre x uniform-azimuth product rule; general closed surfaces are
read from ASCII OFF triangle meshes with centroid collocation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import BadResolution, InconsistentOrientation, OpenSurface, ParseError

__all__ = [
    "ProbePair",
    "SurfaceKind",
    "SurfaceQuadrature",
    "cube_mesh",
    "icosphere_mesh",
    "load_triangle_mesh",
    "probe_pairs",
    "sphere_grid",
    "spheroid_grid",
    "write_off",
]


class SurfaceKind(Enum):
    SPHERE_GRID = "sphere_grid"
    SPHEROID_GRID = "spheroid_grid"
    TRIANGLE_MESH = "triangle_mesh"


@dataclass(frozen=True, eq=False)
class SurfaceQuadrature:
    """Quadrature rule on a closed surface.

    nodes: (N, 3) points, weights: (N,) positive areas, normals: (N, 3) unit
    outward vectors, h: characteristic node spacing sqrt(area/N).  Product
    grids also record their resolution and generating shape parameters, which
    the assembly module uses to pick the sharpest singular quadrature
    available for the geometry.
    """

    nodes: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    h: float
    kind: SurfaceKind
    n_polar: int | None = None
    n_azimuthal: int | None = None
    shape_params: tuple[float, ...] = ()
    #: per-node integral of 1/(4 pi |x_i - y|) over the node's own quadrature
    #: cell, when an analytic value is available (triangle meshes)
    static_self: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.ascontiguousarray(self.nodes, dtype=float))
        object.__setattr__(self, "weights", np.ascontiguousarray(self.weights, dtype=float))
        object.__setattr__(self, "normals", np.ascontiguousarray(self.normals, dtype=float))
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)
        self.normals.setflags(write=False)
        if self.static_self is not None:
            object.__setattr__(self, "static_self",
                               np.ascontiguousarray(self.static_self, dtype=float))
            self.static_self.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def area(self) -> float:
        return float(self.weights.sum())


@dataclass(frozen=True)
class ProbePair:
    """Off-surface evaluation pair x -/+ eps*nu for trace-limit checks."""

    inner: np.ndarray
    outer: np.ndarray
    node_index: int
    eps: float


def _product_rule(n_polar: int, n_azimuthal: int):
    if n_polar < 4 or n_azimuthal < 8:
        raise BadResolution(
            f"need n_polar >= 4 and n_azimuthal >= 8, got {n_polar}x{n_azimuthal}"
        )
    # Gauss-Legendre in cos(theta), periodic trapezoid in phi
    u, wu = leggauss(n_polar)
    theta = np.arccos(u)
    phi = 2.0 * np.pi * np.arange(n_azimuthal) / n_azimuthal
    wphi = 2.0 * np.pi / n_azimuthal
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    ww = np.outer(wu, np.full(n_azimuthal, wphi))
    return tt.ravel(), pp.ravel(), ww.ravel()


def sphere_grid(radius: float, n_polar: int = 16, n_azimuthal: int = 32) -> SurfaceQuadrature:
    """Product quadrature on the sphere of given radius, centered at 0."""
    if radius <= 0:
        raise BadResolution(f"radius must be positive, got {radius}")
    theta, phi, w = _product_rule(n_polar, n_azimuthal)
    st, ct = np.sin(theta), np.cos(theta)
    normals = np.stack([st * np.cos(phi), st * np.sin(phi), ct], axis=-1)
    nodes = radius * normals
    # Gauss weights already carry sin(theta) dtheta via the cos(theta) substitution
    weights = w * radius**2
    h = math.sqrt(weights.sum() / weights.size)
    return SurfaceQuadrature(nodes, weights, normals, h, SurfaceKind.SPHERE_GRID,
                             n_polar, n_azimuthal, (float(radius),))


def spheroid_grid(a: float, b: float, n_polar: int = 16, n_azimuthal: int = 32) -> SurfaceQuadrature:
    """Product quadrature on the spheroid x^2/a^2 + y^2/a^2 + z^2/b^2 = 1."""
    if a <= 0 or b <= 0:
        raise BadResolution(f"semi-axes must be positive, got a={a}, b={b}")
    theta, phi, w = _product_rule(n_polar, n_azimuthal)
    st, ct = np.sin(theta), np.cos(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    nodes = np.stack([a * st * cp, a * st * sp, b * ct], axis=-1)
    # |d_theta r x d_phi r| = a sin(theta) sqrt(b^2 sin^2 + a^2 cos^2); the
    # sin(theta) factor is absorbed by the cos(theta) Gauss substitution
    jac = a * np.sqrt((b * st) ** 2 + (a * ct) ** 2)
    weights = w * jac
    raw = np.stack([b * st * cp, b * st * sp, a * ct], axis=-1)
    normals = raw / np.linalg.norm(raw, axis=-1, keepdims=True)
    h = math.sqrt(weights.sum() / weights.size)
    return SurfaceQuadrature(nodes, weights, normals, h, SurfaceKind.SPHEROID_GRID,
                             n_polar, n_azimuthal, (float(a), float(b)))


def load_triangle_mesh(path) -> SurfaceQuadrature:
    """Read an ASCII OFF mesh; one node per triangle centroid.

    The mesh must be closed and consistently oriented.  If the consistent
    orientation turns out to be inward (negative enclosed volume) all face
    normals are flipped.
    """
    verts, faces = _read_off(path)
    _check_closed_oriented(faces)

    v0, v1, v2 = (verts[faces[:, k]] for k in range(3))
    cross = np.cross(v1 - v0, v2 - v0)
    areas = 0.5 * np.linalg.norm(cross, axis=-1)
    if np.any(areas <= 0):
        raise ParseError("mesh contains a degenerate triangle")
    normals = cross / (2.0 * areas[:, None])
    volume = np.einsum("ij,ij->", v0, cross) / 6.0
    if volume < 0:
        normals = -normals
    nodes = (v0 + v1 + v2) / 3.0
    h = math.sqrt(areas.sum() / areas.size)
    self_int = _triangle_self_potential(nodes, v0, v1, v2)
    return SurfaceQuadrature(nodes, areas, normals, h, SurfaceKind.TRIANGLE_MESH,
                             static_self=self_int)


def _triangle_self_potential(p, v0, v1, v2):
    """Exact integral of 1/(4 pi |p - y|) over each triangle, p the centroid.

    For a coplanar interior point the integral over the triangle is the sum
    over edges of d * (asinh(t2/d) - asinh(t1/d)), with d the distance from p
    to the edge line and t1, t2 the signed tangential offsets of the edge
    endpoints along the edge direction.
    """
    total = np.zeros(len(p))
    for a, b in ((v0, v1), (v1, v2), (v2, v0)):
        e = b - a
        elen = np.linalg.norm(e, axis=-1)
        ehat = e / elen[:, None]
        t1 = np.einsum("ij,ij->i", a - p, ehat)
        t2 = t1 + elen
        perp = (a - p) - t1[:, None] * ehat
        d = np.linalg.norm(perp, axis=-1)
        total += d * (np.arcsinh(t2 / d) - np.arcsinh(t1 / d))
    return total / (4.0 * np.pi)


def _read_off(path):
    try:
        with open(path) as fh:
            tokens = []
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if line:
                    tokens.extend(line.split())
    except OSError as exc:
        raise ParseError(f"cannot read mesh file {path}: {exc}") from exc
    if not tokens or tokens[0] != "OFF":
        raise ParseError(f"{path}: missing OFF header")
    try:
        nv, nf = int(tokens[1]), int(tokens[2])
        pos = 4  # skip edge count
        verts = np.array(tokens[pos : pos + 3 * nv], dtype=float).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for _ in range(nf):
            k = int(tokens[pos])
            if k != 3:
                raise ParseError(f"{path}: only triangle faces supported, got {k}-gon")
            faces.append([int(t) for t in tokens[pos + 1 : pos + 4]])
            pos += 1 + k
        faces = np.array(faces, dtype=int)
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: malformed OFF data") from exc
    if faces.size and (faces.min() < 0 or faces.max() >= nv):
        raise ParseError(f"{path}: face index out of range")
    return verts, faces


def _check_closed_oriented(faces: np.ndarray):
    directed = {}
    for f, (i, j, k) in enumerate(faces):
        for e in ((i, j), (j, k), (k, i)):
            if e in directed:
                raise InconsistentOrientation(f"edge {e} traversed twice in the same direction")
            directed[e] = f
    for i, j in directed:
        if (j, i) not in directed:
            raise OpenSurface(f"boundary edge ({i}, {j}) detected")


def probe_pairs(surface: SurfaceQuadrature, eps_list) -> list[ProbePair]:
    """For every node and offset eps emit the pair (x - eps nu, x + eps nu)."""
    pairs = []
    for eps in eps_list:
        if eps <= 0:
            raise ValueError(f"probe offset must be positive, got {eps}")
        inner = surface.nodes - eps * surface.normals
        outer = surface.nodes + eps * surface.normals
        pairs.extend(
            ProbePair(inner[i], outer[i], i, float(eps)) for i in range(surface.n_nodes)
        )
    return pairs


# ---------------------------------------------------------------------------
# Mesh generators (test geometry and CLI convenience)
# ---------------------------------------------------------------------------

def icosphere_mesh(subdivisions: int = 3, radius: float = 1.0):
    """Icosahedron subdivided and projected to the sphere; 20*4^s faces."""
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=int,
    )
    verts /= np.linalg.norm(verts, axis=-1, keepdims=True)
    for _ in range(subdivisions):
        verts_list = list(verts)
        midpoint = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in midpoint:
                p = verts_list[i] + verts_list[j]
                verts_list.append(p / np.linalg.norm(p))
                midpoint[key] = len(verts_list) - 1
            return midpoint[key]

        new_faces = []
        for i, j, k in faces:
            a, b, c = mid(i, j), mid(j, k), mid(k, i)
            new_faces.extend([[i, a, c], [j, b, a], [k, c, b], [a, b, c]])
        verts = np.array(verts_list)
        faces = np.array(new_faces, dtype=int)
    return radius * verts, faces


def cube_mesh(side: float = 1.0):
    """Axis-aligned cube of the given side length, two triangles per face."""
    s = side / 2.0
    verts = np.array(
        [[x, y, z] for x in (-s, s) for y in (-s, s) for z in (-s, s)], dtype=float
    )
    quads = [
        (0, 1, 3, 2), (4, 6, 7, 5),  # x = -s, x = +s
        (0, 4, 5, 1), (2, 3, 7, 6),  # y = -s, y = +s
        (0, 2, 6, 4), (1, 5, 7, 3),  # z = -s, z = +s
    ]
    faces = []
    for a, b, c, d in quads:
        faces.extend([[a, b, c], [a, c, d]])
    faces = np.array(faces, dtype=int)
    # orient all faces outward
    centroids = verts[faces].mean(axis=1)
    cross = np.cross(verts[faces[:, 1]] - verts[faces[:, 0]],
                     verts[faces[:, 2]] - verts[faces[:, 0]])
    flip = np.einsum("ij,ij->i", centroids, cross) < 0
    faces[flip] = faces[flip][:, ::-1]
    return verts, faces


def write_off(path, verts, faces):
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(verts)} {len(faces)} 0\n")
        for v in verts:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")
