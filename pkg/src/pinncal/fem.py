"""Plane-stress linear-elastic FEM on linear triangles.

Used as the forward model for synthetic full-field data: a square quadrant
with a quarter-hole at one corner, loaded in uniaxial tension. The mesh is a
single transfinite block: rays fan out from the hole center between the two
symmetry edges, graded radially towards the hole rim. A rectangular mesh
variant (no hole) serves as the patch-test reference.

Geometry convention (quadrant of the full plate):
  - domain [0, L] x [0, L], hole quarter of radius R centered at (L, 0)
  - u_x = 0 on the right edge (x = L), u_y = 0 on the bottom edge (y = 0)
  - traction on the left edge (x = 0), top and hole traction-free
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

RESIDUAL_TOL = 1e-10
GEOM_TOL = 1e-9


class MeshError(RuntimeError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass
class Mesh:
    nodes: np.ndarray          # (N, 2)
    triangles: np.ndarray      # (M, 3) int
    groups: dict = field(default_factory=dict)  # name -> node index array
    # tributary area per node (row sums of the mass lumping), for
    # density-corrected point sampling from graded meshes
    node_areas: np.ndarray | None = None


@dataclass
class FemSolution:
    mesh: Mesh
    displacements: np.ndarray  # (N, 2), mm
    max_strain: float          # max principal strain magnitude
    internal_work: float       # elementwise-exact strain energy, N*mm
    external_work: float       # 0.5 * f . u of the applied loads, N*mm
    residual_inf: float        # ||K u - f||_inf / ||f||_inf on free dofs


def quarter_plate_mesh(length: float, radius: float, n_theta: int = 128,
                       n_r: int = 64, grading: float = 1.02) -> Mesh:
    """Transfinite mesh of the quadrant with the quarter-hole at (L, 0).

    Ray i runs at angle theta_i in [pi/2, pi] from the hole center; node
    (i, j) sits at radius between R (hole rim, j=0) and the outer square
    boundary (j=n_r). `grading` > 1 refines towards the hole."""
    if not 0 < radius < length:
        raise MeshError(f"need 0 < R < L, got R={radius}, L={length}")
    if n_theta < 2 or n_r < 2:
        raise MeshError("mesh resolution too coarse")
    center = np.array([length, 0.0])
    thetas = np.linspace(np.pi / 2.0, np.pi, n_theta + 1)
    if grading > 1.0:
        s = (grading ** np.arange(n_r + 1) - 1.0) / (grading ** n_r - 1.0)
    else:
        s = np.linspace(0.0, 1.0, n_r + 1)
    nodes = np.empty(((n_theta + 1) * (n_r + 1), 2))
    for i, th in enumerate(thetas):
        d = np.array([np.cos(th), np.sin(th)])
        t_candidates = []
        if d[0] < -GEOM_TOL:
            t_candidates.append(length / -d[0])     # hits x = 0
        if d[1] > GEOM_TOL:
            t_candidates.append(length / d[1])      # hits y = L
        t_out = min(t_candidates)
        radii = radius + (t_out - radius) * s
        nodes[i * (n_r + 1):(i + 1) * (n_r + 1)] = center + radii[:, None] * d
    # snap boundary coordinates exactly
    nodes[np.abs(nodes[:, 0]) < GEOM_TOL * length, 0] = 0.0
    nodes[np.abs(nodes[:, 1]) < GEOM_TOL * length, 1] = 0.0
    nodes[np.abs(nodes[:, 0] - length) < GEOM_TOL * length, 0] = length
    nodes[np.abs(nodes[:, 1] - length) < GEOM_TOL * length, 1] = length

    def idx(i, j):
        return i * (n_r + 1) + j

    tris = []
    for i in range(n_theta):
        for j in range(n_r):
            a, b = idx(i, j), idx(i, j + 1)
            c, d2 = idx(i + 1, j + 1), idx(i + 1, j)
            # alternate the quad diagonal for isotropy
            if (i + j) % 2 == 0:
                tris.append((a, c, d2))
                tris.append((a, b, c))
            else:
                tris.append((a, b, d2))
                tris.append((d2, b, c))
    triangles = np.asarray(tris, dtype=np.int64)

    all_i = np.arange(n_theta + 1)
    all_j = np.arange(n_r + 1)
    groups = {
        "hole": np.array([idx(i, 0) for i in all_i]),
        "right": np.array([idx(0, j) for j in all_j]),
        "bottom": np.array([idx(n_theta, j) for j in all_j]),
    }
    outer = np.array([idx(i, n_r) for i in all_i])
    groups["left"] = outer[nodes[outer, 0] <= GEOM_TOL * length]
    groups["top"] = outer[nodes[outer, 1] >= length * (1 - GEOM_TOL)]
    mesh = Mesh(nodes, triangles, groups)
    mesh.node_areas = _tributary_areas(mesh)
    _check_orientation(mesh)
    return mesh


def rectangle_mesh(length_x: float, length_y: float, nx: int, ny: int) -> Mesh:
    """Structured rectangle on [0, Lx] x [0, Ly], same BC group layout as the
    plate mesh (degenerate no-hole case)."""
    xs = np.linspace(0.0, length_x, nx + 1)
    ys = np.linspace(0.0, length_y, ny + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def idx(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    groups = {
        "left": np.array([idx(0, j) for j in range(ny + 1)]),
        "right": np.array([idx(nx, j) for j in range(ny + 1)]),
        "bottom": np.array([idx(i, 0) for i in range(nx + 1)]),
        "top": np.array([idx(i, ny) for i in range(nx + 1)]),
    }
    mesh = Mesh(nodes, np.asarray(tris, dtype=np.int64), groups)
    mesh.node_areas = _tributary_areas(mesh)
    _check_orientation(mesh)
    return mesh


def _tri_geometry(nodes, triangles):
    p = nodes[triangles]                      # (M, 3, 2)
    x, y = p[:, :, 0], p[:, :, 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area2 = x[:, 0] * b[:, 0] + x[:, 1] * b[:, 1] + x[:, 2] * b[:, 2]
    return b, c, 0.5 * area2


def _check_orientation(mesh):
    _, _, areas = _tri_geometry(mesh.nodes, mesh.triangles)
    if np.any(areas <= 0):
        raise MeshError(f"{int(np.sum(areas <= 0))} degenerate/inverted triangles")


def _tributary_areas(mesh) -> np.ndarray:
    _, _, areas = _tri_geometry(mesh.nodes, mesh.triangles)
    out = np.zeros(len(mesh.nodes))
    np.add.at(out, mesh.triangles.ravel(),
              np.repeat(areas / 3.0, 3))
    return out


def plane_stress_d_matrix(E: float, nu: float) -> np.ndarray:
    f = E / (1.0 - nu * nu)
    return f * np.array([[1.0, nu, 0.0],
                         [nu, 1.0, 0.0],
                         [0.0, 0.0, 0.5 * (1.0 - nu)]])


def assemble_stiffness(mesh: Mesh, d_matrix: np.ndarray,
                       thickness: float) -> sp.csr_matrix:
    b, c, areas = _tri_geometry(mesh.nodes, mesh.triangles)
    m = len(mesh.triangles)
    rows = np.empty(m * 36, dtype=np.int64)
    cols = np.empty(m * 36, dtype=np.int64)
    vals = np.empty(m * 36)
    dof = np.empty((m, 6), dtype=np.int64)
    dof[:, 0::2] = 2 * mesh.triangles
    dof[:, 1::2] = 2 * mesh.triangles + 1
    inv2a = 1.0 / (2.0 * areas)
    bmats = np.zeros((m, 3, 6))
    for k in range(3):
        bmats[:, 0, 2 * k] = b[:, k] * inv2a
        bmats[:, 1, 2 * k + 1] = c[:, k] * inv2a
        bmats[:, 2, 2 * k] = c[:, k] * inv2a
        bmats[:, 2, 2 * k + 1] = b[:, k] * inv2a
    ke = thickness * areas[:, None, None] * np.einsum(
        "mki,kl,mlj->mij", bmats, d_matrix, bmats)
    for e in range(m):
        rows[e * 36:(e + 1) * 36] = np.repeat(dof[e], 6)
        cols[e * 36:(e + 1) * 36] = np.tile(dof[e], 6)
        vals[e * 36:(e + 1) * 36] = ke[e].ravel()
    n_dof = 2 * len(mesh.nodes)
    return sp.coo_matrix((vals, (rows, cols)), shape=(n_dof, n_dof)).tocsr()


def edge_traction_loads(mesh: Mesh, edge_nodes: np.ndarray,
                        traction: np.ndarray, thickness: float,
                        axis: int) -> np.ndarray:
    """Consistent nodal loads for a constant traction on a straight edge.

    `axis` is the coordinate along which the edge nodes are ordered."""
    f = np.zeros(2 * len(mesh.nodes))
    order = np.argsort(mesh.nodes[edge_nodes, axis])
    chain = edge_nodes[order]
    for a, b in zip(chain[:-1], chain[1:]):
        seg = np.linalg.norm(mesh.nodes[b] - mesh.nodes[a])
        load = 0.5 * seg * thickness * np.asarray(traction, dtype=np.float64)
        f[2 * a:2 * a + 2] += load
        f[2 * b:2 * b + 2] += load
    return f


def solve(mesh: Mesh, d_matrix: np.ndarray, thickness: float,
          loads: np.ndarray, fixed_x: np.ndarray,
          fixed_y: np.ndarray) -> tuple[np.ndarray, float]:
    """Direct sparse solve with Dirichlet dofs eliminated; returns nodal
    displacements and the relative residual on the free dofs."""
    k = assemble_stiffness(mesh, d_matrix, thickness)
    n_dof = k.shape[0]
    fixed = np.concatenate([2 * np.asarray(fixed_x, dtype=np.int64),
                            2 * np.asarray(fixed_y, dtype=np.int64) + 1])
    fixed = np.unique(fixed)
    free = np.setdiff1d(np.arange(n_dof), fixed)
    if free.size == n_dof:
        raise SolverError("no Dirichlet constraints; system is singular")
    k_ff = k[free][:, free].tocsc()
    f_f = loads[free]
    try:
        u_f = spla.splu(k_ff).solve(f_f)
    except RuntimeError as exc:
        raise SolverError(f"sparse factorization failed: {exc}") from exc
    u = np.zeros(n_dof)
    u[free] = u_f
    res = np.abs(k_ff @ u_f - f_f).max() / max(np.abs(f_f).max(), 1e-300)
    if res > RESIDUAL_TOL:
        raise SolverError(f"linear-solve residual {res:.3e} above tolerance")
    return u.reshape(-1, 2), res


def element_strains(mesh: Mesh, displacements: np.ndarray) -> np.ndarray:
    """Constant strain per element, rows (exx, eyy, gamma_xy)."""
    b, c, areas = _tri_geometry(mesh.nodes, mesh.triangles)
    u = displacements[mesh.triangles]      # (M, 3, 2)
    inv2a = 1.0 / (2.0 * areas)
    exx = np.einsum("mk,mk->m", b, u[:, :, 0]) * inv2a
    eyy = np.einsum("mk,mk->m", c, u[:, :, 1]) * inv2a
    gxy = (np.einsum("mk,mk->m", c, u[:, :, 0])
           + np.einsum("mk,mk->m", b, u[:, :, 1])) * inv2a
    return np.column_stack([exx, eyy, gxy])


def max_principal_strain(strains: np.ndarray) -> float:
    exx, eyy, gxy = strains[:, 0], strains[:, 1], strains[:, 2]
    center = 0.5 * (exx + eyy)
    radius = np.sqrt((0.5 * (exx - eyy)) ** 2 + (0.5 * gxy) ** 2)
    return float(np.max(np.maximum(np.abs(center + radius),
                                   np.abs(center - radius))))


def strain_energy(mesh: Mesh, d_matrix: np.ndarray, thickness: float,
                  displacements: np.ndarray) -> float:
    """Exact elementwise quadrature of (1/2) sigma : eps."""
    strains = element_strains(mesh, displacements)
    _, _, areas = _tri_geometry(mesh.nodes, mesh.triangles)
    stresses = strains @ d_matrix.T
    density = np.einsum("mi,mi->m", stresses, strains)
    return float(0.5 * thickness * np.sum(areas * density))
