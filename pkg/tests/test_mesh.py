import numpy as np
import pytest

from msdarcy.mesh import (
    INLET,
    INTERIOR,
    OUTLET,
    WALL,
    CoarsePartition,
    FineMesh,
    MeshError,
    RoughChannelSpec,
    generate_rectangle,
    generate_rough_channel,
    load_mesh,
    make_coefficient,
    save_coefficient,
    save_mesh,
)


def test_tiny_rectangle_counts():
    mesh, part = generate_rectangle(2, 1, 1.0, 1.0, 2)
    assert mesh.n_cells == 4
    assert mesh.n_edges == 9
    assert part.n_coarse_cells == 2
    assert part.n_coarse_edges == 3


def test_paper_scale_counts():
    mesh, part = generate_rectangle(320, 32, 1.0, 0.1, 10)
    assert mesh.n_cells == 20480
    assert mesh.n_edges == 31072
    assert part.n_coarse_cells == 10
    assert part.n_coarse_edges == 11


@pytest.mark.parametrize("nx,ny,Lx,Ly", [(8, 4, 1.0, 0.1), (5, 3, 2.5, 0.4)])
def test_area_sum_and_euler(nx, ny, Lx, Ly):
    mesh, _ = generate_rectangle(nx, ny, Lx, Ly, 1)
    assert mesh.areas.sum() == pytest.approx(Lx * Ly, rel=1e-12)
    assert mesh.n_cells - mesh.n_edges + mesh.n_nodes == 1


def test_edge_partition_property():
    mesh, part = generate_rectangle(8, 4, 1.0, 0.1, 4)
    owned = set()
    for edges in part.coarse_edges:
        owned.update(edges.tolist())
    for e in range(mesh.n_edges):
        tag = mesh.edge_tags[e]
        if tag == WALL:
            assert e not in owned
        elif tag in (INLET, OUTLET):
            assert e in owned
        else:
            ca, cb = mesh.cells_of_edge[e]
            crosses = part.cell_to_coarse[ca] != part.cell_to_coarse[cb]
            assert (e in owned) == crosses


def test_local_domains_are_adjacent_pairs():
    _, part = generate_rectangle(8, 2, 1.0, 0.1, 4)
    assert part.local_domains[0] == (0,)
    assert part.local_domains[-1] == (part.n_coarse_cells - 1,)
    for k in range(1, part.n_coarse_edges - 1):
        assert part.local_domains[k] == (k - 1, k)


def test_orientation_is_reproducible():
    m1, _ = generate_rectangle(6, 3, 1.0, 0.2, 3)
    m2, _ = generate_rectangle(6, 3, 1.0, 0.2, 3)
    assert np.array_equal(m1.edges, m2.edges)
    assert np.array_equal(m1.edge_normals, m2.edge_normals)
    assert np.array_equal(m1.cell_edge_signs, m2.cell_edge_signs)


def test_canonical_normal_is_ccw_rotation_of_tangent():
    mesh, _ = generate_rectangle(4, 2, 1.0, 0.5, 2)
    t = mesh.nodes[mesh.edges[:, 1]] - mesh.nodes[mesh.edges[:, 0]]
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    rotated = np.column_stack([-t[:, 1], t[:, 0]])
    assert np.allclose(mesh.edge_normals, rotated)


def test_generator_rejects_bad_arguments():
    with pytest.raises(MeshError):
        generate_rectangle(10, 2, 1.0, 0.1, 3)  # not divisible
    with pytest.raises(MeshError):
        generate_rectangle(4, 2, -1.0, 0.1, 2)
    with pytest.raises(MeshError):
        generate_rectangle(0, 2, 1.0, 0.1, 1)


def test_rough_zero_waviness_matches_rectangle():
    spec = RoughChannelSpec(width_min=0.1, width_max=0.1)
    rough, rpart = generate_rough_channel(8, 4, 1.0, spec, seed=0, ncoarse=4)
    rect, part = generate_rectangle(8, 4, 1.0, 0.1, 4)
    assert np.array_equal(rough.cells, rect.cells)
    assert np.array_equal(rough.edges, rect.edges)
    assert np.allclose(rough.nodes, rect.nodes)
    assert [e.tolist() for e in rpart.coarse_edges] == [
        e.tolist() for e in part.coarse_edges
    ]


def test_rough_width_band_and_determinism():
    spec = RoughChannelSpec(width_min=0.057, width_max=0.251)
    m1, _ = generate_rough_channel(40, 8, 1.0, spec, seed=1, ncoarse=4)
    m2, _ = generate_rough_channel(40, 8, 1.0, spec, seed=1, ncoarse=4)
    assert np.array_equal(m1.nodes, m2.nodes)

    ny = 8
    ys = m1.nodes[:, 1].reshape(-1, ny + 1)
    widths = ys[:, -1] - ys[:, 0]
    assert widths.min() >= spec.width_min - 1e-12
    assert widths.max() <= spec.width_max + 1e-12


def test_rough_spec_validation():
    with pytest.raises(MeshError):
        RoughChannelSpec(width_min=0.0, width_max=0.1)
    with pytest.raises(MeshError):
        RoughChannelSpec(width_min=0.2, width_max=0.1)


def test_mesh_rejects_degenerate_triangle():
    nodes = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]
    tags = {(0, 1): "wall", (1, 2): "wall", (0, 2): "wall"}
    with pytest.raises(MeshError, match="degenerate"):
        FineMesh(nodes, [(0, 1, 2)], tags)


def test_mesh_rejects_missing_boundary_tag():
    nodes = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    with pytest.raises(MeshError, match="no tag"):
        FineMesh(nodes, [(0, 1, 2)], {(0, 1): "wall"})


def test_partition_rejects_wall_edge_in_coarse_edge():
    mesh, part = generate_rectangle(2, 1, 1.0, 1.0, 2)
    wall = mesh.boundary_edges(WALL)[:1]
    bad_edges = [np.concatenate([part.coarse_edges[0], wall])] + [
        e for e in part.coarse_edges[1:]
    ]
    with pytest.raises(MeshError, match="wall"):
        CoarsePartition(mesh, part.cell_to_coarse, bad_edges)


def test_save_load_round_trip(tmp_path):
    mesh, part = generate_rectangle(4, 2, 1.0, 0.25, 2)
    path = tmp_path / "mesh.txt"
    save_mesh(path, mesh, part)
    loaded, lpart = load_mesh(path)
    assert np.array_equal(loaded.nodes, mesh.nodes)
    assert np.array_equal(loaded.cells, mesh.cells)
    assert np.array_equal(loaded.edge_tags, mesh.edge_tags)
    assert np.array_equal(lpart.cell_to_coarse, part.cell_to_coarse)
    for a, b in zip(lpart.coarse_edges, part.coarse_edges):
        assert np.array_equal(a, b)

    # saving the loaded mesh is byte-identical (canonical form)
    path2 = tmp_path / "mesh2.txt"
    save_mesh(path2, loaded, lpart)
    assert path.read_bytes() == path2.read_bytes()


def test_hand_written_mesh_file_matches_generator(tmp_path):
    # 2x1 unit-square lattice, two vertical strips
    text = """\
MSFEM-MESH 1
# four-cell fixture
NODES 6
0.0 0.0
0.0 1.0
0.5 0.0
0.5 1.0
1.0 0.0
1.0 1.0
CELLS 4
0 2 3
0 3 1
2 4 5
2 5 3
BOUNDARY 6
0 1 inlet
4 5 outlet
0 2 wall
2 4 wall
1 3 wall
3 5 wall
COARSE_CELLS 2
0 1
2 3
COARSE_EDGES 3
0 1
2 3
4 5
"""
    path = tmp_path / "hand.txt"
    path.write_text(text)
    loaded, lpart = load_mesh(path)
    mesh, part = generate_rectangle(2, 1, 1.0, 1.0, 2)
    assert np.allclose(loaded.nodes, mesh.nodes)
    assert np.array_equal(loaded.cells, mesh.cells)
    assert np.array_equal(loaded.edge_tags, mesh.edge_tags)
    for a, b in zip(lpart.coarse_edges, part.coarse_edges):
        assert np.array_equal(a, b)


def test_load_rejects_conflicting_coarse_assignment(tmp_path):
    mesh, part = generate_rectangle(2, 1, 1.0, 1.0, 2)
    path = tmp_path / "mesh.txt"
    save_mesh(path, mesh, part)
    lines = path.read_text().splitlines()
    # append the first coarse edge's fine edge to the second coarse edge too
    idx = lines.index("COARSE_EDGES 3")
    lines[idx + 2] = lines[idx + 2] + " " + lines[idx + 1]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(MeshError, match="assigned to coarse edges"):
        load_mesh(path)


def test_load_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("MSFEM-MESH 1\nNODES 1\nnot-a-number 0.0\n")
    with pytest.raises(MeshError, match="line 3"):
        load_mesh(path)


def test_constant_coefficient():
    mesh, _ = generate_rectangle(4, 2, 1.0, 0.1, 2)
    kap = make_coefficient(mesh, "constant", value=1.0)
    assert np.array_equal(kap.values, np.ones(mesh.n_cells))
    with pytest.raises(MeshError):
        make_coefficient(mesh, "constant", value=-2.0)


def test_seeded_coefficient_bounds_and_determinism():
    mesh, _ = generate_rectangle(16, 4, 1.0, 0.1, 4)
    k1 = make_coefficient(mesh, "loguniform", kappa_min=1.0, kappa_max=1000.0, seed=4)
    k2 = make_coefficient(mesh, "loguniform", kappa_min=1.0, kappa_max=1000.0, seed=4)
    assert np.array_equal(k1.values, k2.values)
    assert k1.values.min() >= 1.0
    assert k1.values.max() <= 1000.0


def test_coefficient_file_round_trip_and_length_check(tmp_path):
    mesh, _ = generate_rectangle(4, 2, 1.0, 0.1, 2)
    kap = make_coefficient(mesh, "loguniform", kappa_min=1.0, kappa_max=10.0, seed=0)
    path = tmp_path / "kappa.txt"
    save_coefficient(path, kap)
    loaded = make_coefficient(mesh, "file", path=path)
    assert np.array_equal(loaded.values, kap.values)

    small, _ = generate_rectangle(2, 2, 1.0, 0.1, 2)
    with pytest.raises(MeshError, match="values for"):
        make_coefficient(small, "file", path=path)
