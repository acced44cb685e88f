"""Triangular fine meshes of thin channel domains and their coarse strip partitions.

Edges carry a canonical orientation (lower node index to higher, unit normal =
90 degree counter-clockwise rotation of the tangent) so that flux degrees of
freedom are reproducible bit-for-bit across rebuilds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# boundary tag codes
INTERIOR = 0
INLET = 1
OUTLET = 2
WALL = 3

TAG_NAMES = {INLET: "inlet", OUTLET: "outlet", WALL: "wall"}
TAG_CODES = {name: code for code, name in TAG_NAMES.items()}


class MeshError(Exception):
    """Invalid mesh geometry, topology or file content."""


class FineMesh:
    """Conforming triangle mesh with oriented edges and tagged boundary.

    Parameters
    ----------
    nodes : (n, 2) float array of node coordinates.
    cells : (m, 3) int array of counter-clockwise node triples.
    boundary_tags : mapping {(a, b): tag} with a < b node indices; every
        boundary edge must get exactly one tag (``inlet``/``outlet``/``wall``
        or the corresponding integer code).
    """

    def __init__(self, nodes, cells, boundary_tags):
        self.nodes = np.ascontiguousarray(nodes, dtype=float)
        self.cells = np.ascontiguousarray(cells, dtype=np.int64)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2:
            raise MeshError("nodes must be an (n, 2) array")
        if self.cells.ndim != 2 or self.cells.shape[1] != 3:
            raise MeshError("cells must be an (m, 3) array")
        if self.cells.size and (self.cells.min() < 0 or self.cells.max() >= len(self.nodes)):
            raise MeshError("cell refers to a node index out of range")

        self._build_edges()
        self._apply_boundary_tags(boundary_tags)
        self.validate()

    # -- construction -----------------------------------------------------

    def _build_edges(self):
        c = self.cells
        # edge opposite local vertex l joins the other two vertices
        pairs = np.stack(
            [c[:, [1, 2]], c[:, [2, 0]], c[:, [0, 1]]], axis=1
        ).reshape(-1, 2)
        pairs = np.sort(pairs, axis=1)
        self.edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        self.cell_edges = inverse.reshape(-1, 3)

        ne = len(self.edges)
        self.cells_of_edge = np.full((ne, 2), -1, dtype=np.int64)
        order = np.argsort(self.cell_edges.ravel(), kind="stable")
        flat_cells = np.repeat(np.arange(len(c)), 3)[order]
        flat_edges = self.cell_edges.ravel()[order]
        counts = np.bincount(flat_edges, minlength=ne)
        if counts.max(initial=0) > 2:
            raise MeshError("edge shared by more than two cells")
        starts = np.concatenate([[0], np.cumsum(counts)])
        for e in range(ne):
            inc = flat_cells[starts[e]:starts[e + 1]]
            self.cells_of_edge[e, : len(inc)] = inc

        tangents = self.nodes[self.edges[:, 1]] - self.nodes[self.edges[:, 0]]
        self.edge_lengths = np.hypot(tangents[:, 0], tangents[:, 1])
        # 90 degree CCW rotation of the tangent
        self.edge_normals = (
            np.column_stack([-tangents[:, 1], tangents[:, 0]])
            / self.edge_lengths[:, None]
        )
        self.edge_midpoints = 0.5 * (
            self.nodes[self.edges[:, 0]] + self.nodes[self.edges[:, 1]]
        )

        p = self.nodes[self.cells]  # (m, 3, 2)
        self.areas = 0.5 * (
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
        )
        self.centroids = p.mean(axis=1)

        # sign of the canonical normal relative to the outward normal of each
        # cell: +1 when the canonical normal points out of the cell
        mids = self.edge_midpoints[self.cell_edges]  # (m, 3, 2)
        normals = self.edge_normals[self.cell_edges]  # (m, 3, 2)
        dots = np.einsum("mlx,mlx->ml", normals, mids - p)
        self.cell_edge_signs = np.where(dots > 0.0, 1.0, -1.0)

    def _apply_boundary_tags(self, boundary_tags):
        ne = len(self.edges)
        self.edge_tags = np.full(ne, INTERIOR, dtype=np.int64)
        lookup = {tuple(pair): e for e, pair in enumerate(self.edges)}
        tagged = np.zeros(ne, dtype=bool)
        for pair, tag in boundary_tags.items():
            a, b = sorted(int(v) for v in pair)
            e = lookup.get((a, b))
            if e is None:
                raise MeshError(f"boundary tag for nonexistent edge ({a}, {b})")
            if self.cells_of_edge[e, 1] >= 0:
                raise MeshError(f"boundary tag on interior edge ({a}, {b})")
            code = TAG_CODES[tag] if isinstance(tag, str) else int(tag)
            if code not in TAG_NAMES:
                raise MeshError(f"unknown boundary tag {tag!r} on edge ({a}, {b})")
            if tagged[e]:
                raise MeshError(f"edge ({a}, {b}) tagged twice")
            self.edge_tags[e] = code
            tagged[e] = True
        missing = np.flatnonzero((self.cells_of_edge[:, 1] < 0) & ~tagged)
        if len(missing):
            a, b = self.edges[missing[0]]
            raise MeshError(f"boundary edge ({a}, {b}) has no tag")

    # -- queries ----------------------------------------------------------

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def diameter(self):
        lo = self.nodes.min(axis=0)
        hi = self.nodes.max(axis=0)
        return float(np.hypot(*(hi - lo)))

    def boundary_edges(self, tag=None):
        mask = self.cells_of_edge[:, 1] < 0
        if tag is not None:
            mask &= self.edge_tags == tag
        return np.flatnonzero(mask)

    def validate(self, tol=1e-12):
        scale = self.diameter
        if np.any(self.areas <= tol * scale**2):
            k = int(np.argmin(self.areas))
            raise MeshError(f"cell {k} is degenerate or negatively oriented")
        rounded = np.round(self.nodes / max(scale, 1.0) / tol)
        if len(np.unique(rounded, axis=0)) != len(self.nodes):
            raise MeshError("duplicate nodes within tolerance")
        euler = self.n_cells - self.n_edges + self.n_nodes
        if euler != 1:
            raise MeshError(f"Euler relation violated (chi = {euler}, expected 1)")


class CoarsePartition:
    """Strip-or-general decomposition of a :class:`FineMesh` into coarse cells
    plus the coarse edges that carry multiscale velocity basis functions.

    Wall edges never belong to a coarse edge; inlet/outlet boundary columns
    each form a coarse edge with a single-cell local domain.
    """

    def __init__(self, mesh, cell_to_coarse, coarse_edges):
        self.cell_to_coarse = np.ascontiguousarray(cell_to_coarse, dtype=np.int64)
        self.coarse_edges = [
            np.ascontiguousarray(np.sort(e), dtype=np.int64) for e in coarse_edges
        ]
        if len(self.cell_to_coarse) != mesh.n_cells:
            raise MeshError("cell_to_coarse length does not match cell count")
        if self.cell_to_coarse.min(initial=0) < 0:
            raise MeshError("negative coarse cell index")
        n_c = int(self.cell_to_coarse.max(initial=-1)) + 1
        self.coarse_cells = [
            np.flatnonzero(self.cell_to_coarse == i) for i in range(n_c)
        ]
        self._validate_and_link(mesh)

    def _validate_and_link(self, mesh):
        for i, cells in enumerate(self.coarse_cells):
            if len(cells) == 0:
                raise MeshError(f"coarse cell {i} is empty")

        owner = np.full(mesh.n_edges, -1, dtype=np.int64)
        self.local_domains = []
        for i, fine_edges in enumerate(self.coarse_edges):
            if len(fine_edges) == 0:
                raise MeshError(f"coarse edge {i} is empty")
            if fine_edges.max() >= mesh.n_edges:
                raise MeshError(f"coarse edge {i} refers to a fine edge out of range")
            if np.any(owner[fine_edges] >= 0):
                e = int(fine_edges[np.argmax(owner[fine_edges] >= 0)])
                raise MeshError(
                    f"fine edge {e} assigned to coarse edges "
                    f"{int(owner[e])} and {i}"
                )
            owner[fine_edges] = i

            sides = set()
            for e in fine_edges:
                tag = mesh.edge_tags[e]
                if tag == WALL:
                    raise MeshError(f"wall edge {int(e)} inside coarse edge {i}")
                ca, cb = mesh.cells_of_edge[e]
                if cb < 0:
                    if tag not in (INLET, OUTLET):
                        raise MeshError(
                            f"untagged boundary edge {int(e)} in coarse edge {i}"
                        )
                    pair = (int(self.cell_to_coarse[ca]),)
                else:
                    if tag != INTERIOR:
                        raise MeshError(f"tagged interior edge {int(e)}")
                    pa, pb = self.cell_to_coarse[ca], self.cell_to_coarse[cb]
                    if pa == pb:
                        raise MeshError(
                            f"fine edge {int(e)} of coarse edge {i} is interior "
                            f"to coarse cell {int(pa)}"
                        )
                    pair = tuple(sorted((int(pa), int(pb))))
                sides.add(pair)
            if len(sides) != 1:
                raise MeshError(
                    f"coarse edge {i} does not separate a single coarse-cell pair"
                )
            self.local_domains.append(sides.pop())

        # every interface or inlet/outlet fine edge must be owned
        for e in range(mesh.n_edges):
            if owner[e] >= 0:
                continue
            ca, cb = mesh.cells_of_edge[e]
            if cb < 0:
                if mesh.edge_tags[e] in (INLET, OUTLET):
                    raise MeshError(f"inlet/outlet edge {e} not in any coarse edge")
            elif self.cell_to_coarse[ca] != self.cell_to_coarse[cb]:
                raise MeshError(f"interface edge {e} not in any coarse edge")
        self.edge_owner = owner

    @property
    def n_coarse_cells(self):
        return len(self.coarse_cells)

    @property
    def n_coarse_edges(self):
        return len(self.coarse_edges)

    def coarse_areas(self, mesh):
        return np.array([mesh.areas[c].sum() for c in self.coarse_cells])


class CoefficientField:
    """Strictly positive scalar permeability per fine cell."""

    def __init__(self, values):
        self.values = np.ascontiguousarray(values, dtype=float)
        if self.values.ndim != 1:
            raise MeshError("coefficient must be a flat per-cell array")
        if not np.all(np.isfinite(self.values)) or np.any(self.values <= 0.0):
            raise MeshError("coefficient must be finite and strictly positive")

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class RoughChannelSpec:
    """Width band and waviness of the perturbed-wall channel generator."""

    width_min: float
    width_max: float
    waviness: float = 1.0
    n_modes: int = 5

    def __post_init__(self):
        if self.width_min <= 0.0 or self.width_max < self.width_min:
            raise MeshError("width band must satisfy 0 < width_min <= width_max")
        if not 0.0 <= self.waviness <= 1.0:
            raise MeshError("waviness must lie in [0, 1]")


def _structured_topology(nx, ny):
    """Cells and structural boundary tags of an nx-by-ny quad lattice with
    every quad split along the same (lower-left to upper-right) diagonal."""
    node = lambda i, j: i * (ny + 1) + j
    cells = np.empty((2 * nx * ny, 3), dtype=np.int64)
    k = 0
    for i in range(nx):
        for j in range(ny):
            a, b = node(i, j), node(i + 1, j)
            c, d = node(i + 1, j + 1), node(i, j + 1)
            cells[k] = (a, b, c)
            cells[k + 1] = (a, c, d)
            k += 2
    tags = {}
    for j in range(ny):
        tags[(node(0, j), node(0, j + 1))] = INLET
        tags[(node(nx, j), node(nx, j + 1))] = OUTLET
    for i in range(nx):
        tags[(node(i, 0), node(i + 1, 0))] = WALL
        tags[(node(i, ny), node(i + 1, ny))] = WALL
    return cells, tags


def _strip_partition(mesh, nx, ny, ncoarse):
    """Vertical-strip coarse cells; coarse edges are the interior strip
    interfaces plus the inlet and outlet boundary columns."""
    quad = np.arange(mesh.n_cells) // 2
    col = quad // ny
    cell_to_coarse = col // (nx // ncoarse)

    coarse_edges = []
    node = lambda i, j: i * (ny + 1) + j
    lookup = {tuple(pair): e for e, pair in enumerate(mesh.edges)}
    for k in range(ncoarse + 1):
        i = 0 if k == 0 else (k * (nx // ncoarse) if k < ncoarse else nx)
        column = [lookup[(node(i, j), node(i, j + 1))] for j in range(ny)]
        coarse_edges.append(np.array(column, dtype=np.int64))
    return CoarsePartition(mesh, cell_to_coarse, coarse_edges)


def generate_rectangle(nx, ny, Lx, Ly, ncoarse):
    """Structured triangulation of [0, Lx] x [0, Ly] with ``ncoarse`` vertical
    coarse strips. Returns ``(mesh, partition)``."""
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be >= 1")
    if Lx <= 0.0 or Ly <= 0.0:
        raise MeshError("domain dimensions must be positive")
    if ncoarse < 1 or nx % ncoarse != 0:
        raise MeshError(f"nx={nx} must be divisible by ncoarse={ncoarse}")

    x = np.linspace(0.0, Lx, nx + 1)
    y = np.linspace(0.0, Ly, ny + 1)
    xx, yy = np.meshgrid(x, y, indexing="ij")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])
    cells, tags = _structured_topology(nx, ny)
    mesh = FineMesh(nodes, cells, tags)
    return mesh, _strip_partition(mesh, nx, ny, ncoarse)


def generate_rough_channel(nx, ny, Lx, amplitude_spec, seed, ncoarse):
    """Seeded channel with wavy walls; the local width stays inside the band
    declared by ``amplitude_spec``. Connectivity matches the rectangle
    generator, only node positions differ."""
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be >= 1")
    if Lx <= 0.0:
        raise MeshError("Lx must be positive")
    if ncoarse < 1 or nx % ncoarse != 0:
        raise MeshError(f"nx={nx} must be divisible by ncoarse={ncoarse}")
    spec = amplitude_spec

    x = np.linspace(0.0, Lx, nx + 1)
    mean_width = 0.5 * (spec.width_min + spec.width_max)
    if spec.waviness == 0.0 or spec.width_max == spec.width_min:
        width = np.full(nx + 1, mean_width)
        bottom = np.zeros(nx + 1)
    else:
        rng = np.random.default_rng(seed)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=spec.n_modes)
        modes = np.arange(1, spec.n_modes + 1)
        raw = np.sum(
            np.cos(2.0 * np.pi * np.outer(x / Lx, modes) + phases) / modes, axis=1
        )
        r = (raw - raw.min()) / (raw.max() - raw.min())  # in [0, 1]
        width = spec.width_min + (spec.width_max - spec.width_min) * r
        width = mean_width + spec.waviness * (width - mean_width)
        phases_b = rng.uniform(0.0, 2.0 * np.pi, size=spec.n_modes)
        raw_b = np.sum(
            np.cos(2.0 * np.pi * np.outer(x / Lx, modes) + phases_b) / modes, axis=1
        )
        bottom = 0.25 * spec.width_min * spec.waviness * raw_b / np.abs(raw_b).max()

    yfrac = np.linspace(0.0, 1.0, ny + 1)
    yy = bottom[:, None] + width[:, None] * yfrac[None, :]
    xx = np.repeat(x[:, None], ny + 1, axis=1)
    nodes = np.column_stack([xx.ravel(), yy.ravel()])
    cells, tags = _structured_topology(nx, ny)
    try:
        mesh = FineMesh(nodes, cells, tags)
    except MeshError as exc:
        raise MeshError(
            f"rough channel geometry degenerate (seed={seed}, "
            f"band=[{spec.width_min}, {spec.width_max}]): {exc}"
        ) from exc
    return mesh, _strip_partition(mesh, nx, ny, ncoarse)


# -- coefficient fields ---------------------------------------------------


def make_coefficient(mesh, kind, *, value=1.0, kappa_min=1.0, kappa_max=1.0,
                     seed=0, n_modes=24, path=None):
    """Build a per-cell permeability field.

    ``kind`` is one of ``constant`` (uniform ``value``), ``loguniform``
    (seeded smooth field with log-values spanning [kappa_min, kappa_max])
    or ``file`` (one float per cell from ``path``).
    """
    if kind == "constant":
        if value <= 0.0:
            raise MeshError("constant coefficient must be positive")
        return CoefficientField(np.full(mesh.n_cells, float(value)))
    if kind == "loguniform":
        if kappa_min <= 0.0 or kappa_max < kappa_min:
            raise MeshError("need 0 < kappa_min <= kappa_max")
        if kappa_max == kappa_min:
            return CoefficientField(np.full(mesh.n_cells, float(kappa_min)))
        rng = np.random.default_rng(seed)
        pts = mesh.centroids
        span = pts.max(axis=0) - pts.min(axis=0)
        scale = max(span[0], 1e-30)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n_modes)
        freq = rng.uniform(1.0, 4.0, size=n_modes) * 2.0 * np.pi / scale
        phase = rng.uniform(0.0, 2.0 * np.pi, size=n_modes)
        proj = pts @ np.column_stack([np.cos(theta), np.sin(theta)]).T
        g = np.cos(proj * freq[None, :] + phase[None, :]).sum(axis=1)
        g = (g - g.min()) / (g.max() - g.min())
        logk = np.log(kappa_min) + g * (np.log(kappa_max) - np.log(kappa_min))
        return CoefficientField(np.exp(logk))
    if kind == "file":
        return load_coefficient(path, mesh)
    raise MeshError(f"unknown coefficient kind {kind!r}")


# -- text formats ---------------------------------------------------------


def save_mesh(path, mesh, partition):
    """Write the line-oriented MSFEM-MESH text format."""
    lines = ["MSFEM-MESH 1", f"NODES {mesh.n_nodes}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    lines.append(f"CELLS {mesh.n_cells}")
    lines += [f"{a} {b} {c}" for a, b, c in mesh.cells]
    bedges = mesh.boundary_edges()
    lines.append(f"BOUNDARY {len(bedges)}")
    for e in bedges:
        a, b = mesh.edges[e]
        lines.append(f"{a} {b} {TAG_NAMES[mesh.edge_tags[e]]}")
    lines.append(f"COARSE_CELLS {partition.n_coarse_cells}")
    for cells in partition.coarse_cells:
        lines.append(" ".join(str(c) for c in cells))
    lines.append(f"COARSE_EDGES {partition.n_coarse_edges}")
    for fine_edges in partition.coarse_edges:
        lines.append(
            " ".join(f"{mesh.edges[e][0]} {mesh.edges[e][1]}" for e in fine_edges)
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


class _LineReader:
    def __init__(self, path):
        with open(path) as fh:
            raw = fh.readlines()
        self.lines = []
        for n, line in enumerate(raw, start=1):
            stripped = line.split("#", 1)[0].strip()
            if stripped:
                self.lines.append((n, stripped))
        self.pos = 0

    def next(self, what):
        if self.pos >= len(self.lines):
            raise MeshError(f"unexpected end of file while reading {what}")
        n, line = self.lines[self.pos]
        self.pos += 1
        return n, line

    def section(self, name):
        n, line = self.next(f"section header {name}")
        parts = line.split()
        if len(parts) != 2 or parts[0] != name:
            raise MeshError(f"line {n}: expected '{name} <count>', got {line!r}")
        try:
            count = int(parts[1])
        except ValueError:
            raise MeshError(f"line {n}: bad count in {name} header") from None
        return count


def load_mesh(path):
    """Read the MSFEM-MESH text format; returns ``(mesh, partition)`` with all
    invariants checked."""
    rd = _LineReader(path)
    n, line = rd.next("header")
    if line != "MSFEM-MESH 1":
        raise MeshError(f"line {n}: not an MSFEM-MESH 1 file")

    nn = rd.section("NODES")
    nodes = np.empty((nn, 2))
    for k in range(nn):
        n, line = rd.next("node")
        try:
            nodes[k] = [float(v) for v in line.split()]
        except ValueError:
            raise MeshError(f"line {n}: bad node coordinates") from None

    nc = rd.section("CELLS")
    cells = np.empty((nc, 3), dtype=np.int64)
    for k in range(nc):
        n, line = rd.next("cell")
        try:
            cells[k] = [int(v) for v in line.split()]
        except ValueError:
            raise MeshError(f"line {n}: bad cell node triple") from None

    nb = rd.section("BOUNDARY")
    tags = {}
    for _ in range(nb):
        n, line = rd.next("boundary edge")
        parts = line.split()
        if len(parts) != 3 or parts[2] not in TAG_CODES:
            raise MeshError(f"line {n}: expected 'a b inlet|outlet|wall'")
        try:
            pair = (int(parts[0]), int(parts[1]))
        except ValueError:
            raise MeshError(f"line {n}: bad boundary edge nodes") from None
        tags[pair] = TAG_CODES[parts[2]]

    mesh = FineMesh(nodes, cells, tags)

    ncc = rd.section("COARSE_CELLS")
    cell_to_coarse = np.full(mesh.n_cells, -1, dtype=np.int64)
    for i in range(ncc):
        n, line = rd.next("coarse cell")
        try:
            members = [int(v) for v in line.split()]
        except ValueError:
            raise MeshError(f"line {n}: bad fine-cell index list") from None
        for c in members:
            if not 0 <= c < mesh.n_cells:
                raise MeshError(f"line {n}: fine cell {c} out of range")
            if cell_to_coarse[c] >= 0:
                raise MeshError(f"line {n}: fine cell {c} in two coarse cells")
            cell_to_coarse[c] = i
    if np.any(cell_to_coarse < 0):
        c = int(np.argmin(cell_to_coarse))
        raise MeshError(f"fine cell {c} not assigned to any coarse cell")

    nce = rd.section("COARSE_EDGES")
    lookup = {tuple(pair): e for e, pair in enumerate(mesh.edges)}
    coarse_edges = []
    for i in range(nce):
        n, line = rd.next("coarse edge")
        vals = line.split()
        if len(vals) % 2 != 0:
            raise MeshError(f"line {n}: odd number of edge endpoints")
        ids = []
        for a, b in zip(vals[::2], vals[1::2]):
            try:
                pair = tuple(sorted((int(a), int(b))))
            except ValueError:
                raise MeshError(f"line {n}: bad fine-edge endpoints") from None
            e = lookup.get(pair)
            if e is None:
                raise MeshError(f"line {n}: no fine edge {pair}")
            ids.append(e)
        coarse_edges.append(np.array(ids, dtype=np.int64))

    return mesh, CoarsePartition(mesh, cell_to_coarse, coarse_edges)


def save_coefficient(path, kappa):
    with open(path, "w") as fh:
        fh.write("MSFEM-KAPPA 1\n")
        fh.writelines(f"{v!r}\n" for v in kappa.values.tolist())


def load_coefficient(path, mesh):
    rd = _LineReader(path)
    n, line = rd.next("header")
    if line != "MSFEM-KAPPA 1":
        raise MeshError(f"line {n}: not an MSFEM-KAPPA 1 file")
    values = []
    while rd.pos < len(rd.lines):
        n, line = rd.next("coefficient value")
        try:
            values.append(float(line))
        except ValueError:
            raise MeshError(f"line {n}: bad coefficient value") from None
    if len(values) != mesh.n_cells:
        raise MeshError(
            f"coefficient file has {len(values)} values for {mesh.n_cells} cells"
        )
    return CoefficientField(np.array(values))
