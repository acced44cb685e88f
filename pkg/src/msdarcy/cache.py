"""Byte-reproducible offline cache keyed by content hashes.

A cache entry stores the full spectral decomposition of every coarse edge
(snapshot rows, eigenvalues, eigenvectors) so any basis count can be selected
online without redoing the offline stage. Keys hash the mesh, partition and
coefficient content, never file timestamps.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .snapshots import SnapshotSet
from .spectral import EdgeSpectrum

_FORMAT = "msdarcy-offline-cache 1"


def mesh_digest(mesh, partition):
    h = hashlib.sha256()
    h.update(mesh.nodes.tobytes())
    h.update(mesh.cells.tobytes())
    h.update(mesh.edge_tags.tobytes())
    h.update(partition.cell_to_coarse.tobytes())
    for edges in partition.coarse_edges:
        h.update(edges.tobytes())
        h.update(b"|")
    return h.hexdigest()


def coefficient_digest(kappa):
    return hashlib.sha256(kappa.values.tobytes()).hexdigest()


def offline_key(mesh, partition, kappa):
    h = hashlib.sha256()
    h.update(mesh_digest(mesh, partition).encode())
    h.update(coefficient_digest(kappa).encode())
    return h.hexdigest()[:24]


def save_offline(cache_root, mesh, partition, kappa, spectra):
    """Persist spectra under the content key; returns the entry directory."""
    entry = Path(cache_root) / offline_key(mesh, partition, kappa)
    entry.mkdir(parents=True, exist_ok=True)
    (entry / "manifest.txt").write_text(
        f"{_FORMAT}\nedges {len(spectra)}\n"
    )
    for i, s in enumerate(spectra):
        mat = s.snapshots.matrix.tocsr()
        np.save(entry / f"edge{i:04d}_ids.npy", s.snapshots.edge_ids)
        np.save(entry / f"edge{i:04d}_cells.npy", s.snapshots.domain_cells)
        np.save(entry / f"edge{i:04d}_indptr.npy", mat.indptr)
        np.save(entry / f"edge{i:04d}_indices.npy", mat.indices)
        np.save(entry / f"edge{i:04d}_data.npy", mat.data)
        np.save(entry / f"edge{i:04d}_eigvals.npy", s.eigenvalues)
        np.save(entry / f"edge{i:04d}_eigvecs.npy", s.eigenvectors)
    return entry


def load_offline(cache_root, mesh, partition, kappa):
    """Load cached spectra for these exact inputs, or ``None`` on any miss or
    malformed entry."""
    entry = Path(cache_root) / offline_key(mesh, partition, kappa)
    manifest = entry / "manifest.txt"
    if not manifest.is_file():
        return None
    lines = manifest.read_text().splitlines()
    if len(lines) != 2 or lines[0] != _FORMAT:
        return None
    n_edges = int(lines[1].split()[1])
    if n_edges != partition.n_coarse_edges:
        return None
    spectra = []
    try:
        for i in range(n_edges):
            edge_ids = np.load(entry / f"edge{i:04d}_ids.npy")
            cells = np.load(entry / f"edge{i:04d}_cells.npy")
            indptr = np.load(entry / f"edge{i:04d}_indptr.npy")
            indices = np.load(entry / f"edge{i:04d}_indices.npy")
            data = np.load(entry / f"edge{i:04d}_data.npy")
            mat = sp.csr_matrix(
                (data, indices, indptr), shape=(len(edge_ids), mesh.n_edges)
            )
            spectra.append(
                EdgeSpectrum(
                    snapshots=SnapshotSet(
                        coarse_edge=i, edge_ids=edge_ids, matrix=mat,
                        domain_cells=cells,
                    ),
                    eigenvalues=np.load(entry / f"edge{i:04d}_eigvals.npy"),
                    eigenvectors=np.load(entry / f"edge{i:04d}_eigvecs.npy"),
                )
            )
    except (OSError, ValueError):
        return None
    return spectra
