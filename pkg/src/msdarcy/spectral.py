"""Dimension reduction of snapshot spaces via local generalized eigenproblems.

Each coarse edge gets the dense J x J problem  A~ psi = lambda S~ psi  with
the interface-flux form on the left and the weighted H(div) form on the
right; eigenvalues ascend and the leading M modes become multiscale basis
vectors on the fine grid.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .fine import hdiv_form_matrix
from .snapshots import build_snapshots, SnapshotSet


class SpectralError(Exception):
    """Rank-deficient snapshot Gram matrix or eigensolver failure."""


def edge_form_matrix(mesh, kappa, partition, i):
    """Diagonal matrix of the interface form over the fine edges of coarse
    edge ``i``: per-edge weight kappa_e^{-1} / |e| in integrated-flux DOFs,
    with kappa_e the harmonic mean of the adjacent cell values."""
    edges = partition.coarse_edges[i]
    ka = kappa.values[mesh.cells_of_edge[edges, 0]]
    other = mesh.cells_of_edge[edges, 1]
    kb = np.where(other >= 0, kappa.values[np.maximum(other, 0)], ka)
    k_edge = 2.0 * ka * kb / (ka + kb)
    weights = 1.0 / (k_edge * mesh.edge_lengths[edges])
    return sp.coo_matrix(
        (weights, (edges, edges)), shape=(mesh.n_edges, mesh.n_edges)
    ).tocsr()


def local_spectral(snapshot_set, mesh, kappa, partition, s_matrix=None):
    """Solve the local eigenproblem; returns ascending ``(eigenvalues,
    eigenvectors)`` with columns S~-orthonormal and sign-fixed so the
    largest-magnitude snapshot coordinate is positive."""
    R = snapshot_set.matrix
    if s_matrix is None:
        s_matrix = hdiv_form_matrix(mesh, kappa)
    A_edge = edge_form_matrix(mesh, kappa, partition, snapshot_set.coarse_edge)

    At = (R @ A_edge @ R.T).toarray()
    St = (R @ s_matrix @ R.T).toarray()
    At = 0.5 * (At + At.T)
    St = 0.5 * (St + St.T)
    try:
        la.cholesky(St)
    except la.LinAlgError as exc:
        raise SpectralError(
            f"snapshot Gram matrix not positive definite on coarse edge "
            f"{snapshot_set.coarse_edge} (rank-deficient snapshots)"
        ) from exc
    try:
        w, v = la.eigh(At, St)
    except la.LinAlgError as exc:
        raise SpectralError(
            f"eigensolver failed on coarse edge {snapshot_set.coarse_edge}: {exc}"
        ) from exc
    w = np.maximum(w, 0.0)  # clip roundoff negatives of a PSD pencil
    flip = v[np.abs(v).argmax(axis=0), np.arange(v.shape[1])] < 0.0
    v[:, flip] *= -1.0
    return w, v


@dataclass
class EdgeSpectrum:
    """Full spectral decomposition of one coarse edge's snapshot space."""

    snapshots: SnapshotSet
    eigenvalues: np.ndarray  # (J,), ascending
    eigenvectors: np.ndarray  # (J, J), columns S~-orthonormal

    @property
    def coarse_edge(self):
        return self.snapshots.coarse_edge

    @property
    def J(self):
        return self.snapshots.J


@dataclass
class MultiscaleBasis:
    """Selected eigenpairs of every coarse edge plus the realized fine-grid
    basis rows."""

    spectra: list
    counts: list
    R_u: sp.csr_matrix  # (sum M) x n_fine_edges
    offsets: np.ndarray  # row offset of each coarse edge's block
    Lambda: float  # min over edges of the first discarded eigenvalue

    @property
    def n_basis(self):
        return self.R_u.shape[0]


def select_basis(spectrum, M):
    """Realized basis rows and first discarded eigenvalue for one edge."""
    if not 1 <= M <= spectrum.J:
        raise SpectralError(
            f"basis count {M} out of range 1..{spectrum.J} on coarse edge "
            f"{spectrum.coarse_edge}"
        )
    rows = sp.csr_matrix(spectrum.eigenvectors[:, :M].T) @ spectrum.snapshots.matrix
    lam_next = float(spectrum.eigenvalues[M]) if M < spectrum.J else np.inf
    return rows.tocsr(), lam_next


def assemble_basis(spectra, M):
    """Stack per-edge selections into a :class:`MultiscaleBasis`. ``M`` is a
    uniform count or a per-edge list."""
    counts = [M] * len(spectra) if np.isscalar(M) else list(M)
    if len(counts) != len(spectra):
        raise SpectralError("per-edge basis counts do not match edge count")
    blocks, lam_nexts, offsets = [], [], [0]
    for spectrum, m in zip(spectra, counts):
        rows, lam_next = select_basis(spectrum, m)
        blocks.append(rows)
        lam_nexts.append(lam_next)
        offsets.append(offsets[-1] + m)
    return MultiscaleBasis(
        spectra=list(spectra),
        counts=counts,
        R_u=sp.vstack(blocks, format="csr"),
        offsets=np.array(offsets),
        Lambda=float(min(lam_nexts)),
    )


def build_offline(mesh, partition, kappa, workers=1):
    """Snapshot + full spectral decomposition for every coarse edge.

    Coarse-cell factorizations are shared between the edges touching a cell;
    with ``workers > 1`` the per-edge solves run on a thread pool.
    """
    from .fine import divergence_matrix, rt0_mass_matrix
    from .snapshots import CoarseCellSolver

    A = rt0_mass_matrix(mesh, kappa)
    B = divergence_matrix(mesh)
    S = hdiv_form_matrix(mesh, kappa)

    solvers = {}
    for i in range(partition.n_coarse_edges):
        for ci in partition.local_domains[i]:
            if ci not in solvers:
                solvers[ci] = CoarseCellSolver(mesh, partition, kappa, ci, A=A, B=B)

    def one(i):
        sset = build_snapshots(mesh, partition, kappa, i, solvers=solvers, A=A, B=B)
        w, v = local_spectral(sset, mesh, kappa, partition, s_matrix=S)
        return EdgeSpectrum(snapshots=sset, eigenvalues=w, eigenvectors=v)

    indices = range(partition.n_coarse_edges)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            spectra = list(pool.map(one, indices))
    else:
        spectra = [one(i) for i in indices]
    return spectra


def build_all(mesh, partition, kappa, M, workers=1):
    """Offline stage end to end: snapshots, spectra and the assembled basis
    with a uniform per-edge count ``M``."""
    return assemble_basis(build_offline(mesh, partition, kappa, workers=workers), M)


def eigenvalue_table(spectra):
    """Rows ``(coarse_edge, mode_index, eigenvalue)`` for CSV export."""
    return [
        (s.coarse_edge, l + 1, float(lam))
        for s in spectra
        for l, lam in enumerate(s.eigenvalues)
    ]
