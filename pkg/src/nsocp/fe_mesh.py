"""Friedrichs-Keller triangulation of the unit square and P1 assembly.

Homogeneous Dirichlet boundary conditions; only interior nodes carry
degrees of freedom. The stiffness matrix on this mesh coincides with the
classical five-point stencil (diagonal 4, neighbors -1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .sparse_core import CsrMatrix

__all__ = [
    "MeshError",
    "TriMesh",
    "FeSpace",
    "FeFunction",
    "FeOperators",
    "build_mesh",
    "build_space",
    "assemble_operators",
    "interpolate",
    "l2_error",
    "l2_norm",
    "linf_nodal_error",
    "export_vtk",
]


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class TriMesh:
    m: int
    vertices: np.ndarray    # ((m+1)^2, 2)
    triangles: np.ndarray   # (2 m^2, 3), positively oriented
    h: float


@dataclass(frozen=True)
class FeSpace:
    mesh: TriMesh
    interior_nodes: np.ndarray  # vertex indices, lexicographic in (j, i)
    n: int

    def zero(self) -> "FeFunction":
        return FeFunction(self, np.zeros(self.n))

    def function(self, coeffs: np.ndarray) -> "FeFunction":
        return FeFunction(self, np.asarray(coeffs, dtype=float))


@dataclass(frozen=True)
class FeFunction:
    space: FeSpace
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (self.space.n,):
            raise MeshError("coefficient vector length does not match space dimension")


@dataclass(frozen=True)
class FeOperators:
    space: FeSpace
    A: CsrMatrix  # stiffness
    M: CsrMatrix  # consistent mass
    D: CsrMatrix  # lumped mass, D_ii = |supp phi_i| / 3

    def d_diag(self) -> np.ndarray:
        return self.D.to_scipy().diagonal()


def build_mesh(m: int) -> TriMesh:
    """Uniform triangulation of [0,1]^2, each cell split along its
    bottom-left to top-right diagonal."""
    if m < 2:
        raise MeshError("need at least 2 subdivisions per side")
    xs = np.arange(m + 1) / m
    jj, ii = np.meshgrid(xs, xs, indexing="ij")  # row j (y), column i (x)
    vertices = np.column_stack([ii.ravel(), jj.ravel()])  # index = j*(m+1)+i

    tris = []
    for j in range(m):
        for i in range(m):
            v00 = j * (m + 1) + i
            v10 = v00 + 1
            v01 = v00 + (m + 1)
            v11 = v01 + 1
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return TriMesh(m=m, vertices=vertices, triangles=np.array(tris, dtype=np.int64), h=1.0 / m)


def build_space(mesh: TriMesh) -> FeSpace:
    m = mesh.m
    interior = []
    for j in range(1, m):
        for i in range(1, m):
            interior.append(j * (m + 1) + i)
    return FeSpace(mesh=mesh, interior_nodes=np.array(interior, dtype=np.int64), n=(m - 1) ** 2)


def _full_to_interior(space: FeSpace) -> np.ndarray:
    nv = len(space.mesh.vertices)
    idx = np.full(nv, -1, dtype=np.int64)
    idx[space.interior_nodes] = np.arange(space.n)
    return idx


def assemble_operators(space: FeSpace) -> FeOperators:
    mesh = space.mesh
    tri = mesh.triangles
    p = mesh.vertices[tri]  # (nt, 3, 2)

    x = p[:, :, 0]
    y = p[:, :, 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    # for this mesh area = h^2/2 > 0 on every triangle
    ke = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (4.0 * area[:, None, None])

    me_ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    me = area[:, None, None] * me_ref[None, :, :]

    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    nv = len(mesh.vertices)
    a_full = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()
    m_full = sp.coo_matrix((me.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()

    d_full = np.zeros(nv)
    np.add.at(d_full, tri.ravel(), np.repeat(area / 3.0, 3))

    ix = space.interior_nodes
    a_int = a_full[np.ix_(ix, ix)]
    m_int = m_full[np.ix_(ix, ix)]
    d_int = sp.diags(d_full[ix], format="csr")
    return FeOperators(
        space=space,
        A=CsrMatrix.from_scipy(a_int),
        M=CsrMatrix.from_scipy(m_int),
        D=CsrMatrix.from_scipy(d_int),
    )


def interpolate(space: FeSpace, g: Callable) -> FeFunction:
    """Nodal (Lagrange) interpolation at the interior nodes."""
    pts = space.mesh.vertices[space.interior_nodes]
    vals = np.asarray(g(pts[:, 0], pts[:, 1]), dtype=float)
    vals = np.broadcast_to(vals, (space.n,)).copy()
    if not np.all(np.isfinite(vals)):
        raise MeshError("non-finite value during interpolation")
    return FeFunction(space, vals)


# 6-point triangle quadrature, exact for polynomials of degree 4.
_QW = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)
_QB = np.array([
    [0.108103018168070, 0.445948490915965, 0.445948490915965],
    [0.445948490915965, 0.108103018168070, 0.445948490915965],
    [0.445948490915965, 0.445948490915965, 0.108103018168070],
    [0.816847572980459, 0.091576213509771, 0.091576213509771],
    [0.091576213509771, 0.816847572980459, 0.091576213509771],
    [0.091576213509771, 0.091576213509771, 0.816847572980459],
])


def _full_coeffs(fe: FeFunction) -> np.ndarray:
    full = np.zeros(len(fe.space.mesh.vertices))
    full[fe.space.interior_nodes] = fe.coeffs
    return full


def l2_error(fe: FeFunction, exact: Callable, refine: int = 1) -> float:
    """Continuous L2 norm of (fe - exact) by per-triangle quadrature.

    ``refine`` uniformly subdivides each triangle before applying the rule
    (used as an independent cross-check of quadrature accuracy).
    """
    mesh = fe.space.mesh
    full = _full_coeffs(fe)
    tri = mesh.triangles
    p = mesh.vertices[tri]  # (nt, 3, 2)
    cval = full[tri]        # (nt, 3)
    area = 0.5 * mesh.h * mesh.h / (refine * refine)

    total = 0.0
    for bary in _subdivided(refine):
        qp_bary = _QB @ bary  # (6, 3) quadrature points in parent barycentric coords
        xq = np.einsum("qk,tkd->tqd", qp_bary, p)   # (nt, 6, 2)
        feq = np.einsum("qk,tk->tq", qp_bary, cval)  # (nt, 6)
        exq = exact(xq[:, :, 0], xq[:, :, 1])
        total += area * np.sum(_QW[None, :] * (feq - exq) ** 2)
    return float(np.sqrt(total))


def _subdivided(refine: int):
    """Barycentric corner triples of a uniform refinement of the reference triangle."""
    r = refine
    subs = []
    for i in range(r):
        for j in range(r - i):
            a = np.array([i, j, r - i - j], dtype=float) / r
            b = np.array([i + 1, j, r - i - j - 1], dtype=float) / r
            c = np.array([i, j + 1, r - i - j - 1], dtype=float) / r
            subs.append(np.stack([a, b, c]))
            if i + j < r - 1:
                d = np.array([i + 1, j + 1, r - i - j - 2], dtype=float) / r
                subs.append(np.stack([b, d, c]))
    return subs


def l2_norm(fe: FeFunction) -> float:
    """Exact continuous L2 norm of the P1 function (element-level mass)."""
    mesh = fe.space.mesh
    full = _full_coeffs(fe)
    tri = mesh.triangles
    cval = full[tri]
    area = 0.5 * mesh.h * mesh.h
    me_ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    quad = np.einsum("tk,kl,tl->", cval, me_ref, cval) * area
    return float(np.sqrt(max(quad, 0.0)))


def linf_nodal_error(fe: FeFunction, exact_nodal: FeFunction) -> float:
    if fe.space is not exact_nodal.space:
        raise MeshError("functions live on different spaces")
    return float(np.max(np.abs(fe.coeffs - exact_nodal.coeffs))) if fe.space.n else 0.0


def export_vtk(fields: Sequence[tuple[str, FeFunction]], path) -> None:
    """Legacy ASCII VTK unstructured grid with one scalar array per field.

    Boundary nodes are written with value 0 (homogeneous Dirichlet).
    """
    if not fields:
        raise MeshError("no fields to export")
    space = fields[0][1].space
    for _, fe in fields:
        if fe.space is not space:
            raise MeshError("all fields must share one space")
    mesh = space.mesh
    nv = len(mesh.vertices)
    nt = len(mesh.triangles)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("nsocp fields\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {nv} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        fh.write(f"CELLS {nt} {4 * nt}\n")
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")
        fh.write(f"CELL_TYPES {nt}\n")
        fh.write("5\n" * nt)
        fh.write(f"POINT_DATA {nv}\n")
        for name, fe in fields:
            fh.write(f"SCALARS {name} double 1\n")
            fh.write("LOOKUP_TABLE default\n")
            full = _full_coeffs(fe)
            for v in full:
                fh.write(f"{v:.17g}\n")
