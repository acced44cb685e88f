"""End-to-end experiment driver: geometry, reference solve, offline stage,
per-M coarse solves, error tables and file artifacts."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

from . import cache as cache_mod
from .coarse import (
    assemble_coarse,
    coarse_velocity_norm,
    estimate_infsup,
    make_projection,
    solve_coarse,
)
from .config import build_coefficient, build_geometry, ConfigError
from .errors import ErrorReport, pressure_error, velocity_error
from .export import (
    write_eigenvalue_csv,
    write_error_csv,
    write_vtk,
)
from .fine import assemble_fine, cell_velocities, solve_saddle
from .spectral import assemble_basis, build_offline, eigenvalue_table


@dataclass
class RunResult:
    config: object
    mesh: object
    partition: object
    kappa: object
    fine: object  # FlowSolution
    spectra: list
    reports: list
    coarse_solutions: dict  # M -> CoarseSolution
    csv_path: Path
    timings: dict


def prepare_offline(cfg, mesh, partition, kappa, verbose=False):
    """Offline spectra, via the content-addressed cache when enabled."""
    spectra = None
    if cfg.use_cache:
        spectra = cache_mod.load_offline(
            cfg.output_dir / "cache", mesh, partition, kappa
        )
        if spectra is not None and verbose:
            print("offline: cache hit")
    if spectra is None:
        spectra = build_offline(mesh, partition, kappa, workers=cfg.workers)
        if cfg.use_cache:
            cache_mod.save_offline(
                cfg.output_dir / "cache", mesh, partition, kappa, spectra
            )
    return spectra


def run_experiment(cfg, verbose=False):
    """Run the configured sweep; writes results.csv (and optional VTK, plot
    and eigenvalue artifacts) under the output directory."""
    t0 = time.perf_counter()
    mesh, partition = build_geometry(cfg)
    kappa = build_coefficient(cfg, mesh)

    min_j = min(len(e) for e in partition.coarse_edges)
    bad = [m for m in cfg.M_values if m > min_j]
    if bad:
        raise ConfigError(
            f"M values {bad} exceed the smallest snapshot count {min_j}"
        )

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    t_geom = time.perf_counter()

    fine_system = assemble_fine(
        mesh, kappa, {"p1": cfg.test["p_in"], "p2": cfg.test["p_out"]},
        cfg.test["source"],
    )
    fine_sol = solve_saddle(fine_system)
    t_fine = time.perf_counter()

    spectra = prepare_offline(cfg, mesh, partition, kappa, verbose=verbose)
    t_offline = time.perf_counter()

    dof_f = mesh.n_edges + mesh.n_cells
    coarse_areas = partition.coarse_areas(mesh)
    reports, solutions = [], {}
    for M in cfg.M_values:
        basis = assemble_basis(spectra, M)
        projection = make_projection(basis, partition, mesh.n_cells)
        coarse_system = assemble_coarse(fine_system, projection)
        sol = solve_coarse(coarse_system, projection)
        beta = estimate_infsup(
            coarse_system, coarse_velocity_norm(mesh, kappa, projection),
            coarse_areas,
        )
        reports.append(
            ErrorReport(
                geometry=cfg.geometry_label,
                test=cfg.test_label,
                M=M,
                DOF_c=basis.n_basis + partition.n_coarse_cells,
                DOF_f=dof_f,
                e_u_h_pct=velocity_error(mesh, kappa, fine_sol.u, sol.U_ms),
                e_p_H_pct=pressure_error(mesh, partition, fine_sol.p, sol.P_H),
                Lambda=basis.Lambda,
                beta_H=beta,
            )
        )
        solutions[M] = sol
        if verbose:
            r = reports[-1]
            print(
                f"M={M}: DOF_c={r.DOF_c} e_u={r.e_u_h_pct:.3f}% "
                f"e_p={r.e_p_H_pct:.3f}% Lambda={r.Lambda:.4g} beta={beta:.4g}"
            )
    t_online = time.perf_counter()

    csv_path = cfg.output_dir / "results.csv"
    write_error_csv(csv_path, reports)
    write_eigenvalue_csv(
        cfg.output_dir / "eigenvalues.csv", eigenvalue_table(spectra)
    )
    if cfg.write_vtk:
        export_fields(cfg, mesh, partition, fine_sol, solutions)
    if cfg.write_plots:
        from . import plots

        plots.convergence_figure(reports, cfg.output_dir / "convergence.png")
        M_max = max(cfg.M_values)
        plots.solution_figure(
            mesh, fine_sol.p, cell_velocities(mesh, fine_sol.u),
            cfg.output_dir / "fine_solution.png", "fine reference solution",
        )
        sol = solutions[M_max]
        plots.solution_figure(
            mesh, projection_pressure(partition, sol.P_H),
            cell_velocities(mesh, sol.U_ms),
            cfg.output_dir / f"multiscale_M{M_max}.png",
            f"multiscale solution, M={M_max}",
        )

    timings = {
        "geometry": t_geom - t0,
        "fine_solve": t_fine - t_geom,
        "offline": t_offline - t_fine,
        "online": t_online - t_offline,
    }
    if verbose:
        print(
            "timings: "
            + " ".join(f"{k}={v:.2f}s" for k, v in timings.items())
        )
    return RunResult(
        config=cfg,
        mesh=mesh,
        partition=partition,
        kappa=kappa,
        fine=fine_sol,
        spectra=spectra,
        reports=reports,
        coarse_solutions=solutions,
        csv_path=csv_path,
        timings=timings,
    )


def projection_pressure(partition, P_H):
    """Expand a coarse pressure to fine cells for export."""
    return P_H[partition.cell_to_coarse]


def export_fields(cfg, mesh, partition, fine_sol, solutions):
    write_vtk(
        cfg.output_dir / "fine_solution.vtk",
        mesh,
        cell_scalars={"pressure": fine_sol.p},
        cell_vectors={"velocity": cell_velocities(mesh, fine_sol.u)},
        title="fine reference solution",
    )
    M_max = max(solutions)
    sol = solutions[M_max]
    write_vtk(
        cfg.output_dir / f"multiscale_M{M_max}.vtk",
        mesh,
        cell_scalars={"pressure": projection_pressure(partition, sol.P_H)},
        cell_vectors={"velocity": cell_velocities(mesh, sol.U_ms)},
        title=f"multiscale solution M={M_max}",
    )


def run_offline_only(cfg, verbose=False):
    """Build and persist the offline cache without running the sweep."""
    mesh, partition = build_geometry(cfg)
    kappa = build_coefficient(cfg, mesh)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    spectra = build_offline(mesh, partition, kappa, workers=cfg.workers)
    entry = cache_mod.save_offline(
        cfg.output_dir / "cache", mesh, partition, kappa, spectra
    )
    if verbose:
        print(f"offline cache written to {entry}")
    return entry
