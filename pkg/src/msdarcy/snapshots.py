"""Local snapshot problems: one constrained flow per fine edge of a coarse edge.

Prescribing the interface fluxes decouples the two coarse cells of a local
domain, so each coarse cell gets a single factorized pure-Neumann solve that
is reused for every snapshot touching it. The divergence source on each side
is the per-cell compatible constant (net prescribed outflux / cell area).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .fine import divergence_matrix, rt0_mass_matrix


class SnapshotError(Exception):
    """Incompatible or singular local snapshot problem."""


class CoarseCellSolver:
    """Factorized local mixed problem on one coarse cell.

    Boundary fluxes of the coarse cell are essential data; the solver returns
    the interior flux DOFs for any prescribed boundary pattern. The pressure
    gauge is zero mean over the cell, enforced with one multiplier.
    """

    def __init__(self, mesh, partition, kappa, coarse_cell, A=None, B=None):
        self.mesh = mesh
        self.coarse_cell = coarse_cell
        if A is None:
            A = rt0_mass_matrix(mesh, kappa)
        if B is None:
            B = divergence_matrix(mesh)

        cells = partition.coarse_cells[coarse_cell]
        self.cells = cells
        inside = np.zeros(mesh.n_cells, dtype=bool)
        inside[cells] = True

        local_edges = np.unique(mesh.cell_edges[cells])
        other = mesh.cells_of_edge[local_edges]
        both_in = inside[other[:, 0]] & (other[:, 1] >= 0) & inside[
            np.where(other[:, 1] >= 0, other[:, 1], 0)
        ]
        self.free_edges = local_edges[both_in]
        self.bnd_edges = local_edges[~both_in]
        self._bnd_pos = {int(e): k for k, e in enumerate(self.bnd_edges)}

        self.A_ff = A[self.free_edges][:, self.free_edges].tocsc()
        self.A_fb = A[self.free_edges][:, self.bnd_edges].tocsr()
        B_loc = B[cells]
        self.B_f = B_loc[:, self.free_edges].tocsr()
        self.B_b = B_loc[:, self.bnd_edges].tocsr()
        # each boundary edge has exactly one incident cell inside, so the
        # column sum is its outward sign
        self.out_signs = np.asarray(self.B_b.sum(axis=0)).ravel()
        self.areas = mesh.areas[cells]
        self.total_area = float(self.areas.sum())

        n_f, n_c = len(self.free_edges), len(cells)
        w = sp.csr_matrix(self.areas.reshape(-1, 1))
        K = sp.bmat(
            [
                [self.A_ff, self.B_f.T, None],
                [self.B_f, None, w],
                [None, w.T, None],
            ],
            format="csc",
        )
        try:
            self._lu = splu(K)
        except RuntimeError as exc:
            raise SnapshotError(
                f"singular local system on coarse cell {coarse_cell}: {exc}"
            ) from exc
        self._n_f = n_f
        self._n_c = n_c

    def solve(self, prescribed):
        """Interior fluxes for boundary data ``prescribed = {edge: dof value}``.

        Returns ``(free_edges, values, source_constant)``.
        """
        g = np.zeros(len(self.bnd_edges))
        for e, v in prescribed.items():
            k = self._bnd_pos.get(int(e))
            if k is None:
                raise SnapshotError(
                    f"edge {e} is not on the boundary of coarse cell "
                    f"{self.coarse_cell}"
                )
            g[k] = v
        outflux = float(self.out_signs @ g)
        alpha = outflux / self.total_area
        rhs = np.concatenate(
            [-self.A_fb @ g, alpha * self.areas - self.B_b @ g, [0.0]]
        )
        x = self._lu.solve(rhs)
        u_f = x[: self._n_f]
        mu = x[-1]
        scale = 1.0 + np.abs(g).max(initial=0.0)
        if not np.all(np.isfinite(x)):
            raise SnapshotError(
                f"local solve on coarse cell {self.coarse_cell} diverged"
            )
        if abs(mu) > 1e-9 * scale:
            raise SnapshotError(
                f"incompatible local problem on coarse cell {self.coarse_cell} "
                f"(constraint multiplier {mu:.3e})"
            )
        return self.free_edges, u_f, alpha


@dataclass
class SnapshotSet:
    """Family of snapshot velocities for one coarse edge, stored as rows of a
    sparse matrix over the global flux DOFs (support limited to the local
    domain)."""

    coarse_edge: int
    edge_ids: np.ndarray  # fine edges of the coarse edge, ascending
    matrix: sp.csr_matrix  # J x n_edges, row j = snapshot for edge_ids[j]
    domain_cells: np.ndarray  # fine cells of the local domain

    @property
    def J(self):
        return len(self.edge_ids)


def build_snapshots(mesh, partition, kappa, i, solvers=None, A=None, B=None):
    """Solve the snapshot family for coarse edge ``i``.

    ``solvers`` may carry prebuilt :class:`CoarseCellSolver` objects keyed by
    coarse cell index; missing ones are created (and stored back when a dict
    is passed), which lets one factorization serve both coarse edges of a
    cell.
    """
    if not 0 <= i < partition.n_coarse_edges:
        raise SnapshotError(f"coarse edge {i} out of range")
    edge_ids = partition.coarse_edges[i]
    domain = partition.local_domains[i]
    if solvers is None:
        solvers = {}

    sides = []
    for ci in domain:
        if ci not in solvers:
            solvers[ci] = CoarseCellSolver(mesh, partition, kappa, ci, A=A, B=B)
        sides.append(solvers[ci])

    n_edges = mesh.n_edges
    rows, cols, vals = [], [], []
    for j, e in enumerate(edge_ids):
        dof = mesh.edge_lengths[e]  # unit normal density in flux DOFs
        cols_j = [int(e)]
        vals_j = [dof]
        for solver in sides:
            free, u_f, _ = solver.solve({int(e): dof})
            cols_j.extend(free.tolist())
            vals_j.extend(u_f.tolist())
        rows.extend([j] * len(cols_j))
        cols.extend(cols_j)
        vals.extend(vals_j)

    matrix = sp.coo_matrix(
        (vals, (rows, cols)), shape=(len(edge_ids), n_edges)
    ).tocsr()
    domain_cells = np.concatenate([partition.coarse_cells[ci] for ci in domain])
    return SnapshotSet(
        coarse_edge=i,
        edge_ids=edge_ids,
        matrix=matrix,
        domain_cells=np.sort(domain_cells),
    )


def snapshot_matrix(snapshot_set):
    """Rows-of-snapshots matrix (J x global velocity DOFs)."""
    return snapshot_set.matrix.copy()
