"""Data generation: analytical fields, sampling, noise, CSV round trips."""

import numpy as np
import pytest

from pinncal import datagen


def test_rod_analytical_field():
    case = datagen.RodCase()
    x = np.array([[0.0], [50.0], [100.0]])
    u = datagen.rod_analytical(case, x)
    assert np.allclose(u.ravel(), [0.0, 100.0 * 50.0 / 210000.0,
                                   100.0 * 100.0 / 210000.0])
    with pytest.raises(datagen.DataError):
        datagen.rod_analytical(case, np.array([[-1.0]]))


def test_rod_training_set_layout():
    ts = datagen.rod_training_set(datagen.RodCase(), 128)
    assert ts.data_points.shape == (128, 1)
    assert ts.data_points[0, 0] == 0.0 and ts.data_points[-1, 0] == 100.0
    assert ts.pde_points is ts.data_points
    assert ts.work_boundary_points[0, 0] == 100.0
    # paper-scale characteristic displacement: mean of t x / E
    assert ts.data_displacements.mean() == pytest.approx(0.0238, abs=2e-4)


def test_noise_statistics():
    rng = np.random.default_rng(0)
    clean = np.zeros((20000, 2))
    noisy = datagen.add_noise(clean, 1e-4, rng)
    assert abs(noisy.std() - 1e-4) < 3e-6
    assert abs(noisy.mean()) < 3e-6
    same = datagen.add_noise(clean, 0.0, rng)
    assert np.array_equal(same, clean)
    assert same is not clean


def test_noise_reproducible_per_seed():
    a = datagen.add_noise(np.zeros(10), 1e-3, np.random.default_rng(5))
    b = datagen.add_noise(np.zeros(10), 1e-3, np.random.default_rng(5))
    assert np.array_equal(a, b)


@pytest.fixture(scope="module")
def plate_solution():
    case = datagen.PlateCase(n_theta=48, n_r=24)
    return case, datagen.fem_solve_plate(case)


def test_plate_solution_sanity(plate_solution):
    case, sol = plate_solution
    # compression towards the hole: u_x <= 0 everywhere, zero on the right edge
    assert sol.displacements[:, 0].max() <= 1e-12
    assert abs(sol.internal_work - sol.external_work) < 1e-10 * sol.external_work
    assert 0.001 < sol.max_strain < 0.002
    assert case.volume == pytest.approx(100.0 ** 2 - np.pi * 100.0 / 4.0)


def test_plate_training_set_sampling(plate_solution):
    case, sol = plate_solution
    ts = datagen.plate_training_set(case, sol, 256, 256, 16, seed=3)
    assert ts.data_points.shape == (256, 2)
    assert ts.pde_points is ts.data_points
    assert np.allclose(ts.work_boundary_points[:, 0], 0.0)
    assert np.allclose(ts.work_boundary_tractions, [-100.0, 0.0])
    # determinism per seed
    ts2 = datagen.plate_training_set(case, sol, 256, 256, 16, seed=3)
    assert np.array_equal(ts.data_points, ts2.data_points)
    ts3 = datagen.plate_training_set(case, sol, 256, 256, 16, seed=4)
    assert not np.array_equal(ts.data_points, ts3.data_points)


def test_plate_independent_collocation(plate_solution):
    case, sol = plate_solution
    ts = datagen.plate_training_set(case, sol, 128, 512, 16, seed=1,
                                    collocation_mode="independent")
    assert len(ts.pde_points) == 512
    r = np.hypot(ts.pde_points[:, 0] - case.length, ts.pde_points[:, 1])
    assert np.all(r > case.radius)
    with pytest.raises(datagen.DataError):
        datagen.plate_training_set(case, sol, 128, 512, 16, seed=1,
                                   collocation_mode="coincide")


def test_plate_noise_applied_to_data_only(plate_solution):
    case, sol = plate_solution
    clean = datagen.plate_training_set(case, sol, 64, 64, 8, seed=9)
    noisy = datagen.plate_training_set(case, sol, 64, 64, 8, seed=9,
                                       noise_sigma=1e-4)
    assert np.array_equal(clean.data_points, noisy.data_points)
    delta = noisy.data_displacements - clean.data_displacements
    assert 0 < np.abs(delta).max() < 1e-3


def test_validation_set_disjoint_seed(plate_solution):
    case, sol = plate_solution
    ts = datagen.plate_training_set(case, sol, 64, 64, 8, seed=2)
    vx, vu = datagen.plate_validation_set(sol, 64, seed=2 + 990001)
    assert vx.shape == (64, 2) and vu.shape == (64, 2)
    assert not np.array_equal(np.sort(vx[:, 0]), np.sort(ts.data_points[:, 0]))


def test_empty_sample_rejected(plate_solution):
    case, sol = plate_solution
    with pytest.raises(datagen.DataError):
        datagen.plate_validation_set(sol, 0, seed=0)


def test_sampling_is_area_unbiased(plate_solution):
    """Plain means over the sampled nodes estimate area integrals without
    the grading-induced bias (the sampler oracle for the work loss)."""
    case, sol = plate_solution
    f_node = sol.mesh.nodes[:, 0] ** 2          # smooth test integrand
    a = sol.mesh.node_areas
    reference = float((a * f_node).sum() / a.sum())
    rng = np.random.default_rng(0)
    estimates = []
    for _ in range(50):
        idx = datagen._sample_nodes(sol, 4096, rng)
        estimates.append(f_node[idx].mean())
    rel = abs(np.mean(estimates) - reference) / reference
    assert rel < 2e-3


def test_csv_round_trip(tmp_path):
    path = tmp_path / "rod.csv"
    x = np.linspace(0.0, 80.0, 40)
    u = 212.55 * x / 239000.0
    datagen.write_1d_csv(path, x, u, traction=212.55, length=80.0, width=20.0)
    parsed = datagen.ingest_1d_csv(path)
    assert parsed["traction"] == 212.55
    assert parsed["length"] == 80.0
    assert parsed["width"] == 20.0
    assert np.allclose(parsed["points"].ravel(), x)
    assert np.allclose(parsed["displacements"].ravel(), u)


def test_csv_rigid_body_offset_removed(tmp_path):
    path = tmp_path / "rod.csv"
    x = np.linspace(5.0, 85.0, 10)
    u = 0.002 * x + 0.5   # constant offset on top of the linear field
    datagen.write_1d_csv(path, x, u, traction=100.0, length=80.0)
    parsed = datagen.ingest_1d_csv(path)
    assert parsed["displacements"][0, 0] == 0.0
    assert parsed["points"][0, 0] == 0.0
    assert np.allclose(parsed["displacements"].ravel(), 0.002 * (x - x[0]))


def test_csv_schema_errors(tmp_path):
    bad_header = tmp_path / "a.csv"
    bad_header.write_text("# traction_Nmm2=1\nwrong,cols\n1,2\n")
    with pytest.raises(datagen.DataError):
        datagen.ingest_1d_csv(bad_header)

    missing_keys = tmp_path / "b.csv"
    missing_keys.write_text("x_mm,u_mm\n1,2\n")
    with pytest.raises(datagen.DataError):
        datagen.ingest_1d_csv(missing_keys)

    non_monotone = tmp_path / "c.csv"
    non_monotone.write_text("# traction_Nmm2=1\n# length_mm=2\n# width_mm=3\n"
                            "x_mm,u_mm\n1,0\n1,0\n")
    with pytest.raises(datagen.DataError):
        datagen.ingest_1d_csv(non_monotone)


def test_csv_training_set(tmp_path):
    path = tmp_path / "rod.csv"
    x = np.linspace(0.0, 80.0, 30)
    datagen.write_1d_csv(path, x, 0.001 * x, traction=212.55, length=80.0)
    ts = datagen.csv_training_set(path)
    assert ts.volume == pytest.approx(80.0)
    assert ts.work_boundary_tractions[0, 0] == 212.55
    assert ts.work_boundary_points[0, 0] == pytest.approx(80.0)


def test_export_fem_solution(tmp_path, plate_solution):
    case, sol = plate_solution
    csv_path = tmp_path / "plate.csv"
    json_path = tmp_path / "plate.json"
    datagen.export_fem_solution(csv_path, json_path, case, sol)
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "node_id,x_mm,y_mm,ux_mm,uy_mm"
    assert len(lines) == 1 + len(sol.mesh.nodes)
    import json
    meta = json.loads(json_path.read_text())
    assert meta["material"]["E_Nmm2"] == 210000.0
    assert meta["mesh"]["nodes"] == len(sol.mesh.nodes)
