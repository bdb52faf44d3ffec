"""Finite element solver oracles: patch test, energy identity, mesh checks."""

import numpy as np
import pytest

from pinncal import fem


E_MOD = 210000.0
NU = 0.3


def test_patch_test_uniaxial():
    """Constant-stress patch: a stretched rectangle must reproduce the exact
    linear displacement field to solver precision."""
    mesh = fem.rectangle_mesh(10.0, 4.0, 6, 3)
    d_matrix = fem.plane_stress_d_matrix(E_MOD, NU)
    s = 100.0
    loads = fem.edge_traction_loads(mesh, mesh.groups["right"],
                                    (s, 0.0), 1.0, axis=1)
    u, residual = fem.solve(mesh, d_matrix, 1.0, loads,
                            mesh.groups["left"], mesh.groups["bottom"])
    exact_x = s / E_MOD * mesh.nodes[:, 0]
    exact_y = -NU * s / E_MOD * mesh.nodes[:, 1]
    assert np.max(np.abs(u[:, 0] - exact_x)) < 1e-8
    assert np.max(np.abs(u[:, 1] - exact_y)) < 1e-8
    assert residual < 1e-10


def test_patch_strains_constant():
    mesh = fem.rectangle_mesh(10.0, 4.0, 5, 4)
    d_matrix = fem.plane_stress_d_matrix(E_MOD, NU)
    loads = fem.edge_traction_loads(mesh, mesh.groups["right"],
                                    (50.0, 0.0), 1.0, axis=1)
    u, _ = fem.solve(mesh, d_matrix, 1.0, loads,
                     mesh.groups["left"], mesh.groups["bottom"])
    strains = fem.element_strains(mesh, u)
    assert np.allclose(strains[:, 0], 50.0 / E_MOD, rtol=1e-8)
    assert np.allclose(strains[:, 2], 0.0, atol=1e-12)


def test_energy_identity():
    """For linear elasticity the strain energy equals the external work of
    the applied loads."""
    mesh = fem.quarter_plate_mesh(100.0, 10.0, 32, 16)
    d_matrix = fem.plane_stress_d_matrix(E_MOD, NU)
    loads = fem.edge_traction_loads(mesh, mesh.groups["left"],
                                    (-100.0, 0.0), 1.0, axis=1)
    u, _ = fem.solve(mesh, d_matrix, 1.0, loads,
                     mesh.groups["right"], mesh.groups["bottom"])
    w_int = fem.strain_energy(mesh, d_matrix, 1.0, u)
    w_ext = 0.5 * loads @ u.ravel()
    assert abs(w_int - w_ext) < 1e-10 * abs(w_ext)


def test_quarter_plate_mesh_geometry():
    length, radius = 100.0, 10.0
    mesh = fem.quarter_plate_mesh(length, radius, 24, 12)
    r = np.hypot(mesh.nodes[:, 0] - length, mesh.nodes[:, 1])
    assert np.all(r >= radius - 1e-9 * length)
    assert np.allclose(r[mesh.groups["hole"]], radius)
    assert np.allclose(mesh.nodes[mesh.groups["left"], 0], 0.0)
    assert np.allclose(mesh.nodes[mesh.groups["right"], 0], length)
    assert np.allclose(mesh.nodes[mesh.groups["bottom"], 1], 0.0)
    # all triangles positively oriented (checked on construction too)
    _, _, areas = fem._tri_geometry(mesh.nodes, mesh.triangles)
    assert np.all(areas > 0)


def test_mesh_area_matches_analytical():
    length, radius = 100.0, 10.0
    mesh = fem.quarter_plate_mesh(length, radius, 128, 64)
    _, _, areas = fem._tri_geometry(mesh.nodes, mesh.triangles)
    exact = length ** 2 - np.pi * radius ** 2 / 4.0
    # the polygonal hole rim slightly under-resolves the circular arc
    assert abs(np.sum(areas) - exact) / exact < 1e-4
    assert np.sum(mesh.node_areas) == pytest.approx(np.sum(areas))


def test_stress_concentration_magnitude():
    """The paper-scale load case produces a maximum principal strain of
    about 0.15 percent near the hole."""
    mesh = fem.quarter_plate_mesh(100.0, 10.0, 128, 64)
    d_matrix = fem.plane_stress_d_matrix(E_MOD, NU)
    loads = fem.edge_traction_loads(mesh, mesh.groups["left"],
                                    (-100.0, 0.0), 1.0, axis=1)
    u, _ = fem.solve(mesh, d_matrix, 1.0, loads,
                     mesh.groups["right"], mesh.groups["bottom"])
    peak = fem.max_principal_strain(fem.element_strains(mesh, u))
    assert 0.0012 < peak < 0.0018


def test_invalid_mesh_parameters():
    with pytest.raises(fem.MeshError):
        fem.quarter_plate_mesh(100.0, 150.0)
    with pytest.raises(fem.MeshError):
        fem.quarter_plate_mesh(100.0, 10.0, n_theta=1)


def test_unconstrained_system_rejected():
    mesh = fem.rectangle_mesh(1.0, 1.0, 2, 2)
    d_matrix = fem.plane_stress_d_matrix(E_MOD, NU)
    with pytest.raises(fem.SolverError):
        fem.solve(mesh, d_matrix, 1.0, np.zeros(2 * len(mesh.nodes)),
                  np.array([], dtype=np.int64), np.array([], dtype=np.int64))
