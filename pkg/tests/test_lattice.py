import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cayley_qa.errors import PlanarInfeasible, Unsupported
from cayley_qa.lattice import (
    Geometry,
    Layout,
    TreeKind,
    build_dual_center_tree,
    build_regular_tree,
    named_graph,
    read_geometry,
    validate_geometry,
    write_geometry,
)


@pytest.mark.parametrize(
    "name, n, shells",
    [("G10", 10, [1, 3, 6]), ("G22", 22, [1, 3, 6, 12]), ("G14", 14, [2, 4, 8])],
)
def test_named_graph_shapes(name, n, shells):
    g, geo = named_graph(name, 5.0)
    assert g.n_vertices == n == geo.n
    assert g.shell_populations() == shells
    assert g.is_tree()
    assert max(g.degrees()) == 3


def test_degrees_core_and_valence():
    g, _ = named_graph("G10")
    deg = g.degrees()
    assert all(deg[v] == 3 for v in g.core)
    assert all(deg[v] == 1 for v in g.valence)
    assert g.signature() == "(0s)(1s)^3(2s)^6"


def test_edges_have_length_d():
    for name in ("G10", "G22", "G14"):
        g, geo = named_graph(name, 7.3)
        dist = geo.distances()
        for j, k in g.edges:
            assert dist[j, k] == pytest.approx(7.3, rel=1e-12)


def test_g10_is_planar_and_g22_is_not():
    _, geo10 = named_graph("G10")
    _, geo22 = named_graph("G22")
    assert np.allclose(geo10.positions[:, 2], 0)
    assert np.ptp(geo22.positions[:, 2]) > 0.5


def test_rotated_branch_height():
    _, geo = named_graph("G22", 1.0)
    z = np.abs(geo.positions[:, 2])
    assert z.max() == pytest.approx(math.sin(2 * math.pi / 5) * math.sin(math.pi / 3), rel=1e-9)


def test_planar_four_shells_infeasible():
    with pytest.raises(PlanarInfeasible):
        build_regular_tree(3, 4, 1.0, Layout.PLANAR)


def test_unsupported_inputs():
    with pytest.raises(Unsupported):
        named_graph("G99")
    g, _ = named_graph("G10")
    with pytest.raises(Unsupported):
        g.swap_permutation()


def test_dual_center_layout():
    g, geo = build_dual_center_tree(2.0)
    assert g.kind is TreeKind.DUAL_CENTER
    c0, c1 = g.centers
    assert (min(c0, c1), max(c0, c1)) in g.edge_set()
    perm = g.swap_permutation()
    assert perm == [1, 0, 4, 5, 2, 3, 10, 11, 12, 13, 6, 7, 8, 9]
    # the half swap is a graph automorphism and a C2 rotation about z
    assert {tuple(sorted((perm[j], perm[k]))) for j, k in g.edges} == set(g.edges)
    rot = geo.positions * np.array([-1, -1, 1])
    assert np.allclose(rot[perm], geo.positions, atol=1e-12)


def test_validation_bounds():
    for name in ("G10", "G22", "G14"):
        g, geo = named_graph(name, 9.0)
        rep = validate_geometry(g, geo)
        assert rep.ok
        assert rep.min_nonedge_ratio >= math.sqrt(3) * (1 - 1e-9)
        assert rep.max_nonedge_coupling_ratio <= 1 / 27 * (1 + 1e-9)


def test_validation_flags_close_pair():
    g, geo = named_graph("G10", 1.0)
    bad = geo.displaced(9, geo.positions[8] - geo.positions[9] + np.array([0.3, 0, 0]))
    assert not validate_geometry(g, bad).ok


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 50.0), st.sampled_from(["G10", "G22", "G14"]))
def test_validation_is_scale_invariant(d, name):
    g, geo = named_graph(name, d)
    ref = validate_geometry(*named_graph(name, 1.0))
    rep = validate_geometry(g, geo)
    assert rep.min_nonedge_ratio == pytest.approx(ref.min_nonedge_ratio, rel=1e-9)
    assert rep.max_nonedge_coupling_ratio == pytest.approx(ref.max_nonedge_coupling_ratio, rel=1e-9)


@pytest.mark.parametrize("name", ["G10", "G22", "G14"])
def test_geometry_file_roundtrip(name):
    g, geo = named_graph(name, 8.51)
    buf = io.StringIO()
    write_geometry(g, geo, buf)
    buf.seek(0)
    g2, geo2 = read_geometry(buf)
    assert g2.edges == g.edges and g2.shell_of == g.shell_of and g2.kind == g.kind
    assert np.allclose(geo2.positions, geo.positions, rtol=1e-8, atol=1e-8)
    assert geo2.d == pytest.approx(geo.d)


def test_geometry_positions_read_only():
    geo = Geometry(np.zeros((2, 3)), 1.0)
    with pytest.raises(ValueError):
        geo.positions[0, 0] = 1.0
