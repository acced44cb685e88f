"""Legacy-VTK ASCII field export and delimited result tables."""

from __future__ import annotations

import numpy as np


def write_vtk(path, mesh, cell_scalars=None, cell_vectors=None, title="msdarcy fields"):
    """Write the mesh with per-cell scalar and 2-vector fields as legacy
    ASCII VTK (vectors get a zero z component)."""
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_nodes} double",
    ]
    lines += [f"{x!r} {y!r} 0.0" for x, y in mesh.nodes.tolist()]
    lines.append(f"CELLS {mesh.n_cells} {4 * mesh.n_cells}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.cells]
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines += ["5"] * mesh.n_cells

    lines.append(f"CELL_DATA {mesh.n_cells}")
    for name, values in (cell_scalars or {}).items():
        values = np.asarray(values, dtype=float)
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines += [f"{v!r}" for v in values.tolist()]
    for name, vectors in (cell_vectors or {}).items():
        vectors = np.asarray(vectors, dtype=float)
        lines.append(f"VECTORS {name} double")
        lines += [f"{vx!r} {vy!r} 0.0" for vx, vy in vectors.tolist()]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def format_error_csv(reports):
    """Deterministic CSV bytes for a list of :class:`ErrorReport` rows.

    Percentages carry three decimals to line up with the published tables;
    the spectral gap and inf-sup columns keep full precision.
    """
    lines = ["geometry,test,M,DOF_c,DOF_f,e_u_h_pct,e_p_H_pct,Lambda,beta_H"]
    for r in reports:
        lam = "inf" if np.isinf(r.Lambda) else f"{r.Lambda:.12g}"
        lines.append(
            f"{r.geometry},{r.test},{r.M},{r.DOF_c},{r.DOF_f},"
            f"{r.e_u_h_pct:.3f},{r.e_p_H_pct:.3f},{lam},{r.beta_H:.12g}"
        )
    return ("\n".join(lines) + "\n").encode()


def write_error_csv(path, reports):
    with open(path, "wb") as fh:
        fh.write(format_error_csv(reports))


def write_eigenvalue_csv(path, table):
    """CSV of ``(coarse_edge, mode, eigenvalue)`` rows."""
    lines = ["coarse_edge,mode,eigenvalue"]
    lines += [f"{i},{l},{lam:.12g}" for i, l, lam in table]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_coarse_pressure_csv(path, P_H):
    lines = ["coarse_cell,pressure"]
    lines += [f"{i},{p:.12g}" for i, p in enumerate(P_H)]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
