"""End-to-end calibration pipeline and the three study harnesses.

`run_calibration` performs one identification: build the training set,
normalize, assemble the objective, minimize with BFGS, convert the bulk and
shear moduli back to engineering constants, and persist the result. The
sweep harnesses repeat calibrations over a parameter grid with distinct
seeds and aggregate mean relative errors, MARE and SEM per grid cell.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import datagen, mechanics, metrics, network as nw
from .config import (CalibrationResult, ConfigError, ExperimentConfig,
                     config_hash)
from .loss import EnhancedObjective, LossWeights, StandardObjective1D, TrainingSet
from .optimizer import StopCriteria, bfgs_minimize

VALIDATION_SEED_OFFSET = 990001
NET_SEED_STRIDE = 7919


def _atomic_write(path, text: str):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_history_csv(path, rows: list[dict]):
    if not rows:
        return
    columns = list(rows[0].keys())
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(repr(row.get(c, "")) for c in columns))
    _atomic_write(path, "\n".join(lines) + "\n")


@dataclass
class PreparedCase:
    """Training inputs for one calibration, plus whatever is needed to score
    the fitted networks afterwards."""
    training: TrainingSet
    validation_points: np.ndarray | None
    validation_displacements: np.ndarray | None
    n_components: int
    truth: dict | None                     # None when no ground truth exists
    rod_case: datagen.RodCase | None = None
    fem_solution: datagen.fem.FemSolution | None = None


def prepare_case(cfg: ExperimentConfig, seed: int,
                 fem_solution=None) -> PreparedCase:
    """Build training and validation data for a resolved configuration."""
    if cfg.case == "rod_analytical":
        rod = datagen.RodCase(length=cfg.rod.length, traction=cfg.rod.traction,
                              modulus=cfg.e_true)
        ts = datagen.rod_training_set(rod, cfg.n_data)
        if cfg.noise_sigma > 0:
            rng = np.random.default_rng(seed)
            ts.data_displacements = datagen.add_noise(
                ts.data_displacements, cfg.noise_sigma, rng)
        vx = np.linspace(0.0, rod.length, cfg.n_validation).reshape(-1, 1)
        return PreparedCase(ts, vx, datagen.rod_analytical(rod, vx), 1,
                            truth={"E": cfg.e_true}, rod_case=rod)
    if cfg.case == "rod_csv":
        ts = datagen.csv_training_set(cfg.csv_path)
        # no ground truth and no analytical field; score the fit on the
        # measured points themselves
        return PreparedCase(ts, ts.data_points, ts.data_displacements, 1,
                            truth=None)
    case = datagen.PlateCase(
        length=cfg.plate.length, radius=cfg.plate.radius,
        thickness=cfg.plate.thickness, traction=cfg.plate.traction,
        material=mechanics.IsotropicElasticEnu(cfg.e_true, cfg.nu_true),
        n_theta=cfg.plate.n_theta, n_r=cfg.plate.n_r, grading=cfg.plate.grading)
    solution = fem_solution or datagen.fem_solve_plate(case)
    ts = datagen.plate_training_set(
        case, solution, cfg.n_data, cfg.n_collocation, cfg.n_work_boundary,
        seed=seed, collocation_mode=cfg.collocation_mode,
        noise_sigma=cfg.noise_sigma)
    vx, vu = datagen.plate_validation_set(
        solution, cfg.n_validation, seed=seed + VALIDATION_SEED_OFFSET)
    return PreparedCase(ts, vx, vu, 2,
                        truth={"E": cfg.e_true, "nu": cfg.nu_true},
                        fem_solution=solution)


def _build_networks(cfg: ExperimentConfig, prepared: PreparedCase,
                    seed: int) -> list[nw.NormalizedNetwork]:
    sizes = [prepared.n_components] + list(cfg.hidden_layers) + [1]
    nets = []
    for comp in range(prepared.n_components):
        net = nw.glorot_normal_init(sizes, seed=NET_SEED_STRIDE * seed + comp)
        spec = nw.spec_from_data(prepared.training.data_points,
                                 prepared.training.data_displacements[:, comp])
        nets.append(nw.NormalizedNetwork(net, spec))
    return nets


def _identified_parameters(cfg, objective, x) -> tuple[dict, dict]:
    if cfg.mode == "standard":
        return {"E": objective.identified_modulus(x)}, {}
    values = objective.material_at(x)
    _, alphas = objective.split(x)
    if len(values) == 1:
        return {"E": float(values[0])}, {"alpha_E": float(alphas[0])}
    k_id, g_id = float(values[0]), float(values[1])
    e_id, nu_id = mechanics.convert_KG_to_Enu(k_id, g_id)
    return ({"E": e_id, "nu": nu_id, "K": k_id, "G": g_id},
            {"alpha_K": float(alphas[0]), "alpha_G": float(alphas[1])})


def run_calibration(config: ExperimentConfig, seed: int | None = None,
                    out_dir: str | None = None, persist: bool = True,
                    fem_solution=None,
                    hash_override: str | None = None) -> CalibrationResult:
    """One full identification run. With `persist` the result JSON, the loss
    history CSV and per-network checkpoints land in the output directory."""
    cfg = config.resolve()
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": seed})
    seed = cfg.seed
    out = out_dir or cfg.out_dir
    prepared = prepare_case(cfg, seed, fem_solution=fem_solution)
    weights = LossWeights(data_weight=cfg.data_weight)

    t0 = time.time()
    if cfg.mode == "standard":
        sizes = [1] + list(cfg.hidden_layers) + [1]
        net = nw.glorot_normal_init(sizes, seed=NET_SEED_STRIDE * seed)
        objective = StandardObjective1D(
            net, prepared.training, weights,
            traction=prepared.rod_case.traction,
            loaded_end=prepared.rod_case.length, e_initial=cfg.e_initial)
        x0 = objective.initial_vector()
    else:
        nets = _build_networks(cfg, prepared, seed)
        if prepared.n_components == 1:
            estimates = [cfg.e_estimate]
        else:
            estimates = list(cfg.kg_estimates())
        objective = EnhancedObjective(nets, estimates, prepared.training,
                                      weights)
        x0 = objective.initial_vector()

    history_rows = []

    def record(k, x, value):
        row = {"iter": k}
        if cfg.mode == "enhanced":
            breakdown = objective.breakdowns.get(x)
            if breakdown is not None:
                row.update(breakdown.as_dict())
        else:
            row["total"] = value
            row["E"] = float(x[-1])
        history_rows.append(row)

    result = bfgs_minimize(objective, x0,
                           StopCriteria(max_iters=cfg.max_iters),
                           callback=record)
    wall = time.time() - t0

    identified, alphas = _identified_parameters(cfg, objective, result.x)

    rel_errors = None
    if prepared.truth is not None:
        rel_errors = {key: metrics.relative_error(identified[key], true)
                      for key, true in prepared.truth.items()}

    rl2 = None
    if cfg.mode == "enhanced" and prepared.validation_points is not None:
        nets_final = objective.networks_at(result.x)
        labels = ["u"] if prepared.n_components == 1 else ["x", "y"]
        rl2 = {}
        for comp, label in enumerate(labels):
            pred, _, _ = nw.evaluate(nets_final[comp],
                                     prepared.validation_points)
            rl2[label] = metrics.relative_l2(
                pred, prepared.validation_displacements[:, comp])

    breakdown = objective.breakdowns.get(result.x) \
        if cfg.mode == "enhanced" else None

    history_path = None
    checkpoint_paths = None
    if persist:
        os.makedirs(out, exist_ok=True)
        tag = f"{cfg.case}_{cfg.mode}_seed{seed}"
        history_path = os.path.join(out, f"history_{tag}.csv")
        _write_history_csv(history_path, history_rows)
        if cfg.mode == "enhanced":
            checkpoint_paths = []
            for comp, net in enumerate(objective.networks_at(result.x)):
                path = os.path.join(out, f"net_{tag}_{comp}.json")
                nw.save_checkpoint(path, net, alphas)
                checkpoint_paths.append(path)

    record_obj = CalibrationResult(
        case=cfg.case, mode=cfg.mode, seed=seed,
        config_hash=hash_override or config_hash(cfg),
        identified=identified, correction_factors=alphas,
        relative_errors=rel_errors, rl2=rl2,
        loss_breakdown=breakdown.as_dict() if breakdown else None,
        optimizer_status=result.status, iterations=result.iterations,
        final_loss=result.value, wall_time_s=wall,
        loss_history_path=history_path, checkpoint_paths=checkpoint_paths)

    if persist:
        path = os.path.join(out, f"result_{cfg.case}_{cfg.mode}_seed{seed}.json")
        _atomic_write(path, record_obj.model_dump_json(indent=2))
    return record_obj


def generate_data(config: ExperimentConfig, out_dir: str | None = None,
                  seed: int | None = None) -> list[str]:
    """Write the case's synthetic data set to disk: training and validation
    CSVs for the rod, the FEM nodal solution (CSV plus metadata JSON) for
    the plate. The file contents are fully determined by (config, seed)."""
    cfg = config.resolve()
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": seed})
    if cfg.case == "rod_csv":
        raise ConfigError("rod_csv reads an external file; nothing to generate")
    out = out_dir or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    prepared = prepare_case(cfg, cfg.seed)
    if cfg.case == "rod_analytical":
        rod = prepared.rod_case
        train_path = os.path.join(out, "rod_training.csv")
        val_path = os.path.join(out, "rod_validation.csv")
        datagen.write_1d_csv(train_path, prepared.training.data_points,
                             prepared.training.data_displacements,
                             rod.traction, rod.length)
        datagen.write_1d_csv(val_path, prepared.validation_points,
                             prepared.validation_displacements,
                             rod.traction, rod.length)
        meta_path = os.path.join(out, "rod_meta.json")
        _atomic_write(meta_path, json.dumps({
            "case": "rod_analytical", "modulus_Nmm2": cfg.e_true,
            "traction_Nmm2": rod.traction, "length_mm": rod.length,
            "n_training": cfg.n_data, "n_validation": cfg.n_validation,
            "noise_sigma_mm": cfg.noise_sigma, "seed": cfg.seed,
            "config_hash": config_hash(cfg)}, indent=2))
        return [train_path, val_path, meta_path]
    csv_path = os.path.join(out, "plate_displacements.csv")
    json_path = os.path.join(out, "plate_meta.json")
    case = datagen.PlateCase(
        length=cfg.plate.length, radius=cfg.plate.radius,
        thickness=cfg.plate.thickness, traction=cfg.plate.traction,
        material=mechanics.IsotropicElasticEnu(cfg.e_true, cfg.nu_true),
        n_theta=cfg.plate.n_theta, n_r=cfg.plate.n_r, grading=cfg.plate.grading)
    datagen.export_fem_solution(csv_path, json_path, case,
                                prepared.fem_solution)
    return [csv_path, json_path]


# -- study harnesses ------------------------------------------------------

@dataclass
class SweepCell:
    label: str
    overrides: dict


@dataclass
class SweepSummary:
    study: str
    config_hash: str
    cells: list[dict] = field(default_factory=list)


def _study_cells(cfg: ExperimentConfig) -> list[SweepCell]:
    study = cfg.study
    if study is None:
        raise ConfigError("configuration has no study section")
    cells = []
    if study.name == "estimate_sensitivity":
        if cfg.case == "plate" and study.estimate_grid:
            for e_fac, nu_fac in study.estimate_grid:
                cells.append(SweepCell(
                    label=f"E{100 * e_fac:g}%_nu{100 * nu_fac:g}%",
                    overrides={"e_estimate": e_fac * cfg.e_true,
                               "nu_estimate": nu_fac * cfg.nu_true}))
        elif study.estimate_factors:
            for fac in study.estimate_factors:
                cells.append(SweepCell(
                    label=f"E{100 * fac:g}%",
                    overrides={"e_estimate": fac * cfg.e_true}))
        else:
            raise ConfigError("estimate study grid missing for this case")
    elif study.name == "collocation_convergence":
        for count in study.collocation_counts:
            cells.append(SweepCell(
                label=f"Ncol{count}",
                overrides={"n_collocation": count,
                           "collocation_mode": "independent"}))
    else:
        for sigma in study.noise_sigmas:
            cells.append(SweepCell(label=f"sigma{sigma:g}",
                                   overrides={"noise_sigma": sigma}))
    return cells


def _aggregate_cell(cell: SweepCell, runs: list[CalibrationResult],
                    failures: list[str]) -> dict:
    row = {"cell": cell.label, "n_runs": len(runs), "n_failures": len(failures)}
    row.update({f"grid_{k}": v for k, v in cell.overrides.items()})
    if runs:
        params = sorted(runs[0].relative_errors or [])
        for key in params:
            errs = [r.relative_errors[key] for r in runs]
            row[f"mean_RE_{key}"] = float(np.mean(errs))
            row[f"MARE_{key}"] = metrics.mare(errs)
            row[f"SEM_{key}"] = metrics.sem(errs) if len(errs) > 1 else 0.0
        if runs[0].rl2:
            for comp in runs[0].rl2:
                row[f"mean_rl2_{comp}"] = float(np.mean(
                    [r.rl2[comp] for r in runs]))
        row["mean_wall_time_s"] = float(np.mean([r.wall_time_s for r in runs]))
    if failures:
        row["failures"] = "; ".join(failures)
    return row


def run_sweep(config: ExperimentConfig, out_dir: str | None = None,
              persist: bool = True, fem_solution=None,
              progress=None) -> SweepSummary:
    """Run the configured study: n_repeats calibrations per grid cell with
    distinct seeds. Individual run failures are recorded in the cell row and
    never abort the sweep."""
    cfg = config.resolve()
    out = out_dir or cfg.out_dir
    repeats = cfg.study.n_repeats if cfg.study and cfg.study.n_repeats \
        else cfg.n_repeats
    cells = _study_cells(cfg)
    if cfg.case == "plate" and fem_solution is None:
        # the synthetic reference solution is shared by every run
        base = prepare_case(cfg, cfg.seed)
        fem_solution = base.fem_solution

    summary = SweepSummary(study=cfg.study.name, config_hash=config_hash(cfg))
    run_dir = os.path.join(out, f"sweep_{cfg.study.name}") if persist else None
    for cell in cells:
        # derive the cell from the unresolved input so resolution rules
        # (noisy-data lambda_o, profile budgets) still apply per cell
        cell_cfg = config.model_copy(update=cell.overrides)
        runs, failures = [], []
        for rep in range(repeats):
            seed = cfg.seed + rep
            try:
                res = run_calibration(
                    cell_cfg, seed=seed, persist=persist,
                    out_dir=os.path.join(run_dir, cell.label) if run_dir else None,
                    fem_solution=fem_solution,
                    hash_override=summary.config_hash)
                runs.append(res)
            except Exception as exc:  # noqa: BLE001 - record and continue
                failures.append(f"seed {seed}: {exc}")
            if progress is not None:
                progress(cell.label, rep, repeats)
        summary.cells.append(_aggregate_cell(cell, runs, failures))

    if persist:
        os.makedirs(run_dir, exist_ok=True)
        payload = {"schema_version": 1, "study": summary.study,
                   "config_hash": summary.config_hash,
                   "n_repeats": repeats, "cells": summary.cells}
        _atomic_write(os.path.join(run_dir, "summary.json"),
                      json.dumps(payload, indent=2))
        _write_sweep_csv(os.path.join(run_dir, "summary.csv"), summary.cells)
    return summary


def _write_sweep_csv(path, cells: list[dict]):
    columns = []
    for cell in cells:
        for key in cell:
            if key not in columns:
                columns.append(key)
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(cells)
    os.replace(tmp, path)


# -- report aggregation ---------------------------------------------------

def build_report(results_dir: str, out_dir: str | None = None,
                 force: bool = False) -> dict:
    """Merge run and sweep JSONs under `results_dir` into plot-ready CSV
    tables. Refuses to mix results from different configurations unless
    forced; corrupt files are listed and skipped."""
    out = out_dir or os.path.join(results_dir, "report")
    run_rows, sweep_tables, problems, hashes = [], {}, [], set()
    for root, _, files in os.walk(results_dir):
        if os.path.abspath(root).startswith(os.path.abspath(out)):
            continue
        for name in sorted(files):
            path = os.path.join(root, name)
            if name.startswith("result_") and name.endswith(".json"):
                try:
                    res = CalibrationResult(**json.load(open(path)))
                except (ValueError, OSError) as exc:
                    problems.append(f"{path}: {exc}")
                    continue
                hashes.add(res.config_hash)
                row = {"case": res.case, "mode": res.mode, "seed": res.seed,
                       "config_hash": res.config_hash,
                       "status": res.optimizer_status,
                       "iterations": res.iterations,
                       "final_loss": res.final_loss,
                       "wall_time_s": res.wall_time_s}
                for key, val in res.identified.items():
                    row[f"ident_{key}"] = val
                for key, val in (res.relative_errors or {}).items():
                    row[f"RE_{key}"] = val
                for key, val in (res.rl2 or {}).items():
                    row[f"rl2_{key}"] = val
                run_rows.append(row)
            elif name == "summary.json":
                try:
                    payload = json.load(open(path))
                    sweep_tables[payload["study"]] = payload
                    hashes.add(payload["config_hash"])
                except (KeyError, ValueError, OSError) as exc:
                    problems.append(f"{path}: {exc}")
    if not run_rows and not sweep_tables:
        raise FileNotFoundError(f"no results under {results_dir}")
    if len(hashes) > 1 and not force:
        raise ConfigError(
            f"results stem from {len(hashes)} different configurations "
            "(pass force=True to merge anyway)")

    os.makedirs(out, exist_ok=True)
    written = []
    if run_rows:
        path = os.path.join(out, "runs.csv")
        _write_sweep_csv(path, run_rows)
        written.append(path)
    for study, payload in sweep_tables.items():
        path = os.path.join(out, f"study_{study}.csv")
        _write_sweep_csv(path, payload["cells"])
        written.append(path)
    return {"tables": written, "problems": problems,
            "n_runs": len(run_rows), "n_studies": len(sweep_tables)}
