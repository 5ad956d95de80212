import numpy as np
import pytest

from sawfeti.assembly import basis_tables
from sawfeti.geometry import (
    DampingSpec,
    GeometryError,
    MeshResolutionError,
    build_side_block,
    build_unit_cell,
    cell_offset,
    check_interface_match,
    damping,
    stretch,
)

from conftest import tiny_geometry


class TestDamping:
    def test_zero_in_physical_domain(self):
        spec = DampingSpec(d_pml=0.5, x1_left=0.0, x1_right=3.0, x3_bottom=-1.0)
        pts = np.array([[1.0, 0.05, -0.5], [2.9, 0.0, -0.99], [0.01, 0.1, 0.0]])
        assert np.array_equal(damping(pts, spec), np.zeros((3, 3)))

    def test_paper_verbatim_profile_values(self):
        # printed quartic: 0 at the exterior edge, 1 at the junction
        spec = DampingSpec(d_pml=0.5, x1_left=0.0, profile="paper-verbatim")
        d_edge = damping([0.0 - 0.5, 0.0, 0.0], spec)
        assert d_edge[0] == pytest.approx((1.0 - 1.0) ** 2, abs=1e-15)
        d_junction = damping([-1e-12, 0.0, 0.0], spec)
        assert d_junction[0] == pytest.approx(1.0, abs=1e-9)

    def test_default_profile_vanishes_at_junction(self):
        spec = DampingSpec(d_pml=0.5, x1_left=0.0)
        assert damping([-1e-12, 0.0, 0.0], spec)[0] == pytest.approx(0.0, abs=1e-9)
        assert damping([-0.5, 0.0, 0.0], spec)[0] == pytest.approx(1.0, abs=1e-15)

    def test_profile_continuous_inside_region(self):
        for profile in ("smooth-junction", "paper-verbatim"):
            spec = DampingSpec(d_pml=1.0, x1_left=0.0, profile=profile)
            xs = np.linspace(-1.0, 0.0, 2001)
            d = damping(np.column_stack([xs, 0 * xs, 0 * xs]), spec)[:, 0]
            assert np.abs(np.diff(d)).max() < 5e-3
            assert (d >= 0).all()


class TestStretch:
    def test_interior_point(self):
        spec = DampingSpec(d_pml=0.5, x1_left=0.0, x3_bottom=-1.0)
        assert np.array_equal(stretch([0.3, 0.0, -0.5], spec), np.ones(3))

    def test_single_direction(self):
        spec = DampingSpec(d_pml=1.0, x1_left=0.0, amplitude=1.0)
        a = stretch([-1.0, 0.0, 0.0], spec)  # d = (1, 0, 0)
        assert a[0] == pytest.approx(1.0 - 1.0j)
        assert a[1] == a[2] == 1.0

    def test_corner_region(self):
        # d1 = d3 = 0.5 at mid-depth of both profiles
        spec = DampingSpec(d_pml=1.0, x1_left=0.0, x3_bottom=0.0)
        xi = 1.0 - np.sqrt(1.0 - np.sqrt(0.5))  # smooth-junction profile inverse
        a = stretch([-xi, 0.0, -xi], spec)
        assert a[0] == pytest.approx(1.0 - 0.5j, rel=1e-12)
        assert a[2] == pytest.approx(1.0 - 0.5j, rel=1e-12)
        assert a[1] == 1.0

    def test_invariants(self):
        spec = DampingSpec(d_pml=0.7, x1_left=0.0, x1_right=2.0, x3_bottom=-1.0)
        rng = np.random.default_rng(0)
        pts = rng.uniform(-1, 3, size=(200, 3))
        a = stretch(pts, spec)
        assert np.array_equal(a.real, np.ones_like(a.real))
        assert (a.imag <= 0).all()


def mesh_volume(mesh):
    _, wts, _, d_tab = basis_tables(tuple(mesh.orders))
    vol = 0.0
    for conn in mesh.elems:
        xe = mesh.coords[conn]
        for q in range(len(wts)):
            vol += wts[q] * np.linalg.det(xe.T @ d_tab[q])
    return vol


class TestUnitCell:
    def test_node_counts(self):
        geom = tiny_geometry()
        cell, elec = build_unit_cell(geom)
        # 5x3 in-plane, 5 substrate + 3 strip nodes sharing one layer
        assert cell.n_nodes == 5 * 3 * (5 + 3 - 1)
        assert elec.n_nodes == 27

    def test_reference_resolution_grid_count(self):
        # 17 x 2 x 17 substrate part = 578 grid points
        geom = tiny_geometry(
            pitch=1.0, width=0.1, depth=10.0, pml_thickness=2.0,
            substrate_nodes=(17, 2, 17), electrode_nodes=(9, 2, 5), pml_nodes=5,
        )
        cell, elec = build_unit_cell(geom)
        in_substrate = cell.coords[:, 2] >= -geom.depth - 1e-12
        assert int(in_substrate.sum()) == 578
        assert elec.n_nodes == 9 * 2 * 5

    def test_contact_coincidence(self):
        geom = tiny_geometry()
        cell, elec = build_unit_cell(geom)
        contact = cell.coords[cell.gamma_m]
        bottom = elec.coords[elec.interfaces["b"]]
        assert contact.shape == bottom.shape
        assert np.abs(contact - bottom).max() <= 1e-12

    def test_incompatible_order_rejected(self):
        with pytest.raises(MeshResolutionError):
            build_unit_cell(tiny_geometry(substrate_nodes=(4, 3, 5)))

    def test_misaligned_electrode_rejected(self):
        with pytest.raises(MeshResolutionError):
            build_unit_cell(tiny_geometry(electrode_width=0.3))

    def test_volume(self):
        geom = tiny_geometry()
        cell, elec = build_unit_cell(geom)
        box = geom.pitch * geom.width * (geom.depth + geom.pml_thickness)
        assert mesh_volume(cell) == pytest.approx(box, rel=1e-12)
        ebox = geom.electrode_width * geom.width * geom.electrode_height
        assert mesh_volume(elec) == pytest.approx(ebox, rel=1e-12)

    def test_free_dof_map_excludes_dirichlet(self):
        cell, _ = build_unit_cell(tiny_geometry())
        n = cell.n_nodes
        for node in cell.gamma_ext:
            assert cell.full_to_free[3 * node] == -1
            assert cell.full_to_free[3 * n + node] == -1
        for node in cell.gamma_m:
            assert cell.full_to_free[3 * n + node] == -1
            assert cell.full_to_free[3 * node] >= 0


class TestSideBlocks:
    def test_interface_count_matches_cell(self):
        geom = tiny_geometry()
        cell, _ = build_unit_cell(geom)
        left = build_side_block("left", geom)
        right = build_side_block("right", geom)
        assert left.interface_size("r") == cell.interface_size("l")
        assert right.interface_size("l") == cell.interface_size("r")

    def test_exterior_tags(self):
        geom = tiny_geometry()
        left = build_side_block("left", geom)
        ext = left.coords[left.gamma_ext]
        on_outer = np.isclose(ext[:, 0], -geom.pml_thickness)
        on_bottom = np.isclose(ext[:, 2], -(geom.depth + geom.pml_thickness))
        assert np.all(on_outer | on_bottom)
        # every exterior-face node is tagged
        outer_all = np.isclose(left.coords[:, 0], -geom.pml_thickness)
        bottom_all = np.isclose(left.coords[:, 2], -(geom.depth + geom.pml_thickness))
        assert set(np.nonzero(outer_all | bottom_all)[0]) == set(left.gamma_ext)

    def test_corner_shares_strip_edge(self):
        # the corner of the side column must meet the cell's bottom strip
        geom = tiny_geometry()
        cell, _ = build_unit_cell(geom)
        left = build_side_block("left", geom)
        cell_iface = cell.coords[cell.interfaces["l"]]
        left_iface = left.coords[left.interfaces["r"]]
        strip = cell_iface[:, 2] < -geom.depth + 1e-12
        assert strip.any()
        assert np.abs(cell_iface[strip] - left_iface[strip]).max() <= 1e-12

    def test_invalid_side(self):
        with pytest.raises(GeometryError):
            build_side_block("top", tiny_geometry())


class TestInterfaceMatching:
    def test_all_interfaces_coincide(self):
        geom = tiny_geometry()
        cell, _ = build_unit_cell(geom)
        left = build_side_block("left", geom)
        right = build_side_block("right", geom)
        tol = geom.match_tol
        check_interface_match(left, "r", 0.0, cell, "l", cell_offset(geom, 1), tol)
        check_interface_match(
            cell, "r", cell_offset(geom, 1), cell, "l", cell_offset(geom, 2), tol
        )
        check_interface_match(
            cell, "r", cell_offset(geom, 3), right, "l", 3 * geom.pitch, tol
        )

    def test_mismatch_detected(self):
        geom = tiny_geometry()
        cell, _ = build_unit_cell(geom)
        left = build_side_block("left", geom)
        with pytest.raises(GeometryError):
            check_interface_match(left, "r", 0.0, cell, "l", 0.5, geom.match_tol)

    def test_interface_order_is_lexicographic(self):
        cell, _ = build_unit_cell(tiny_geometry())
        for side in ("l", "r", "t"):
            c = cell.coords[cell.interfaces[side]]
            keys = np.lexsort((c[:, 0], c[:, 1], c[:, 2]))
            assert np.array_equal(keys, np.arange(len(c)))
