"""Structured hex meshes for the four subregion types, plus PML evaluation.

The truncated device decomposes into: a left absorbing column (side PML
plus its bottom corner), N identical unit cells (substrate slab plus the
absorbing strip underneath), N identical electrodes, and a right absorbing
column.  Identical subregions share one mesh built in local coordinates;
instances differ only by an x1 translation, which keeps their operators
literally equal.

Node numbering is lexicographic by (x3, x2, x1) with x1 fastest; ordered
interface node lists inherit that order on both sides of every interface,
so trace operators are pure 0-1 selections.
"""

from dataclasses import dataclass, field

import numpy as np

#: geometric coincidence tolerance, relative to the mesh extent
MATCH_RTOL = 1e-12


class GeometryError(ValueError):
    """Invalid geometry specification."""


class MeshResolutionError(GeometryError):
    """Node counts cannot tile the element order or do not align."""


# ---------------------------------------------------------------------------
# PML damping and stretching
# ---------------------------------------------------------------------------

#: 1D damping profiles on xi in [0, 1], xi = 0 at the junction with the
#: physical domain, xi = 1 at the exterior boundary.
PROFILES = {
    # Quartic vanishing at the junction: keeps alpha continuous across the
    # interior interface.
    "smooth-junction": lambda xi: (1.0 - (1.0 - xi) ** 2) ** 2,
    # Quartic equal to 1 at the junction and 0 at the exterior.
    "paper-verbatim": lambda xi: (1.0 - xi**2) ** 2,
}


@dataclass(frozen=True)
class DampingSpec:
    """Active PML half-spaces and the 1D profile, in mesh-local coordinates.

    ``x1_left`` (damping for x1 below it), ``x1_right`` (above it) and
    ``x3_bottom`` (below it) are junction coordinates or None when that
    side carries no absorbing layer.  The x2 direction is never damped.
    """

    d_pml: float
    x1_left: float | None = None
    x1_right: float | None = None
    x3_bottom: float | None = None
    profile: str = "smooth-junction"
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.d_pml > 0:
            raise GeometryError("PML thickness must be positive")
        if self.profile not in PROFILES:
            raise GeometryError(f"unknown damping profile {self.profile!r}")


#: no absorbing layers at all (electrodes, undamped test meshes)
NO_DAMPING = DampingSpec(d_pml=1.0)


def damping(points, spec):
    """Per-direction damping values d = (d1, d2, d3) >= 0 at points.

    ``points`` is (n, 3) or (3,); returns matching (n, 3) or (3,).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros_like(pts)
    prof = PROFILES[spec.profile]

    def accumulate(col, depth_into_pml):
        inside = depth_into_pml > 0.0
        if inside.any():
            xi = np.clip(depth_into_pml[inside] / spec.d_pml, 0.0, 1.0)
            out[inside, col] += spec.amplitude * prof(xi)

    if spec.x1_left is not None:
        accumulate(0, spec.x1_left - pts[:, 0])
    if spec.x1_right is not None:
        accumulate(0, pts[:, 0] - spec.x1_right)
    if spec.x3_bottom is not None:
        accumulate(2, spec.x3_bottom - pts[:, 2])
    return out if np.asarray(points).ndim == 2 else out[0]


def stretch(points, spec):
    """Complex stretch factors alpha_k = 1 - i d_k; (1, 1, 1) outside PML."""
    return 1.0 - 1j * damping(points, spec)


# ---------------------------------------------------------------------------
# Structured meshes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeometrySpec:
    """Sizes (any consistent length unit), node counts and element orders.

    ``substrate_nodes`` counts the unit-cell substrate part (the bottom
    absorbing strip adds ``pml_nodes`` along x3); ``pml_nodes`` also sets
    the across-thickness count of the side columns.
    """

    pitch: float
    width: float
    depth: float
    electrode_width: float
    electrode_height: float
    pml_thickness: float
    substrate_nodes: tuple[int, int, int]
    electrode_nodes: tuple[int, int, int]
    pml_nodes: int
    orders: tuple[int, int, int] = (2, 1, 2)
    damping_profile: str = "smooth-junction"
    damping_amplitude: float = 1.0

    def __post_init__(self):
        for name in ("pitch", "width", "depth", "electrode_width",
                     "electrode_height", "pml_thickness"):
            if not getattr(self, name) > 0:
                raise GeometryError(f"{name} must be positive")
        if self.electrode_width >= self.pitch:
            raise GeometryError("electrode must be strictly narrower than the pitch")

    @property
    def match_tol(self):
        extent = max(self.pitch, self.depth + self.pml_thickness, self.width)
        return MATCH_RTOL * extent

    def scaled(self, factor):
        """Same spec with every length multiplied by ``factor``."""
        return GeometrySpec(
            pitch=self.pitch * factor,
            width=self.width * factor,
            depth=self.depth * factor,
            electrode_width=self.electrode_width * factor,
            electrode_height=self.electrode_height * factor,
            pml_thickness=self.pml_thickness * factor,
            substrate_nodes=self.substrate_nodes,
            electrode_nodes=self.electrode_nodes,
            pml_nodes=self.pml_nodes,
            orders=self.orders,
            damping_profile=self.damping_profile,
            damping_amplitude=self.damping_amplitude,
        )


@dataclass
class SubregionMesh:
    """One structured hex mesh plus its interface/boundary bookkeeping.

    ``interfaces`` maps side ('l', 't', 'r', 'b') to an ordered node
    array; ``gamma_ext`` are exterior Dirichlet nodes, ``gamma_m`` the
    electrode-contact nodes (potential Dirichlet).  DOF layout over a
    mesh with n nodes: displacement DOFs 3*k + comp, then (piezoelectric
    meshes only) potential DOFs 3*n + k.  ``free_dofs`` indexes the
    unconstrained subset; ``interface_dofs`` gives, per side, positions
    in the free vector (displacement components node-major, then
    potential where the interface carries it).
    """

    label: str
    coords: np.ndarray
    elems: np.ndarray
    orders: tuple[int, int, int]
    axes: tuple[np.ndarray, np.ndarray, np.ndarray]
    has_potential: bool
    interfaces: dict = field(default_factory=dict)
    gamma_ext: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    gamma_m: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    damping_spec: DampingSpec = NO_DAMPING

    def __post_init__(self):
        n = self.n_nodes
        self.n_dofs = 3 * n + (n if self.has_potential else 0)
        constrained = np.zeros(self.n_dofs, dtype=bool)
        for node in self.gamma_ext:
            constrained[3 * node : 3 * node + 3] = True
            if self.has_potential:
                constrained[3 * n + node] = True
        if self.gamma_m.size and not self.has_potential:
            raise GeometryError("gamma_m on a mesh without potential DOFs")
        for node in self.gamma_m:
            constrained[3 * n + node] = True
        self.free_dofs = np.nonzero(~constrained)[0]
        self.full_to_free = np.full(self.n_dofs, -1, dtype=int)
        self.full_to_free[self.free_dofs] = np.arange(self.free_dofs.size)
        self.n_free = self.free_dofs.size

        self.interface_dofs = {}
        for side, nodes in self.interfaces.items():
            with_potential = self.has_potential and side in ("l", "r")
            dofs = [3 * k + c for k in nodes for c in range(3)]
            if with_potential:
                dofs.extend(3 * n + k for k in nodes)
            free = self.full_to_free[np.array(dofs, dtype=int)]
            if (free < 0).any():
                raise GeometryError(
                    f"interface {side!r} of {self.label} touches constrained DOFs"
                )
            self.interface_dofs[side] = free

    @property
    def n_nodes(self):
        return self.coords.shape[0]

    def potential_dof(self, node):
        return 3 * self.n_nodes + node

    def interface_size(self, side):
        return self.interface_dofs[side].size


def _axis_from_segments(segments, order, what):
    """Concatenated per-segment linspaces sharing junction nodes."""
    parts = []
    for lo, hi, count in segments:
        if count < 2:
            raise MeshResolutionError(f"{what}: need at least 2 nodes per segment")
        if (count - 1) % order != 0:
            raise MeshResolutionError(
                f"{what}: {count} nodes cannot tile elements of order {order}"
            )
        seg = np.linspace(lo, hi, count)
        parts.append(seg if not parts else seg[1:])
    axis = np.concatenate(parts)
    if not (np.diff(axis) > 0).all():
        raise GeometryError(f"{what}: axis not strictly increasing")
    return axis


def _connectivity(counts, orders):
    """Element-node connectivity of a structured grid, fixed ordering."""
    n1, n2, n3 = counts
    p1, p2, p3 = orders
    ne = ((n1 - 1) // p1, (n2 - 1) // p2, (n3 - 1) // p3)
    local = [
        (l1, l2, l3)
        for l3 in range(p3 + 1)
        for l2 in range(p2 + 1)
        for l1 in range(p1 + 1)
    ]
    elems = np.empty((ne[0] * ne[1] * ne[2], len(local)), dtype=int)
    idx = 0
    for e3 in range(ne[2]):
        for e2 in range(ne[1]):
            for e1 in range(ne[0]):
                base = (e1 * p1, e2 * p2, e3 * p3)
                elems[idx] = [
                    (base[2] + l3) * n2 * n1 + (base[1] + l2) * n1 + (base[0] + l1)
                    for (l1, l2, l3) in local
                ]
                idx += 1
    return elems


def _grid(x1_axis, x2_axis, x3_axis, orders):
    n1, n2, n3 = len(x1_axis), len(x2_axis), len(x3_axis)
    for axis, order, name in zip((x1_axis, x2_axis, x3_axis), orders, "123"):
        if (len(axis) - 1) % order != 0:
            raise MeshResolutionError(
                f"x{name}: {len(axis)} nodes cannot tile elements of order {order}"
            )
    i3, i2, i1 = np.meshgrid(range(n3), range(n2), range(n1), indexing="ij")
    coords = np.column_stack(
        [x1_axis[i1.ravel()], x2_axis[i2.ravel()], x3_axis[i3.ravel()]]
    )
    elems = _connectivity((n1, n2, n3), orders)
    grids = (i1.ravel(), i2.ravel(), i3.ravel())
    return coords, elems, grids


def _face_nodes(grids, axis_index, grid_value):
    """Nodes on a constant-index face, in lexicographic node order."""
    mask = grids[axis_index] == grid_value
    return np.nonzero(mask)[0]


def build_unit_cell(geom, n_cells=1):
    """Meshes of one unit cell: the substrate block and its electrode.

    The substrate block spans the cell pitch horizontally and the full
    substrate depth plus the bottom absorbing strip vertically; the
    electrode sits centered on the top face and its bottom nodes
    coincide with substrate top nodes exactly.

    Parameters
    ----------
    geom : GeometrySpec
    n_cells : int
        Unused by the mesh itself (cells are translated copies); kept so
        callers can document intent.

    Returns
    -------
    (SubregionMesh, SubregionMesh)
        Substrate mesh (label 'cell') and electrode mesh (label
        'electrode'), both in cell-local coordinates x1 in [0, pitch].
    """
    n1, n2, n3 = geom.substrate_nodes
    x1 = _axis_from_segments([(0.0, geom.pitch, n1)], geom.orders[0], "cell x1")
    x2 = _axis_from_segments([(0.0, geom.width, n2)], geom.orders[1], "cell x2")
    x3 = _axis_from_segments(
        [
            (-(geom.depth + geom.pml_thickness), -geom.depth, geom.pml_nodes),
            (-geom.depth, 0.0, n3),
        ],
        geom.orders[2],
        "cell x3",
    )
    coords, elems, grids = _grid(x1, x2, x3, geom.orders)

    bottom = _face_nodes(grids, 2, 0)
    top = _face_nodes(grids, 2, len(x3) - 1)
    left = _face_nodes(grids, 0, 0)
    right = _face_nodes(grids, 0, len(x1) - 1)

    # electrode footprint on the top face
    off = 0.5 * (geom.pitch - geom.electrode_width)
    tol = geom.match_tol
    in_footprint = (coords[top, 0] >= off - tol) & (
        coords[top, 0] <= off + geom.electrode_width + tol
    )
    contact = top[in_footprint]

    not_ext = ~np.isin(np.arange(coords.shape[0]), bottom)
    substrate = SubregionMesh(
        label="cell",
        coords=coords,
        elems=elems,
        orders=geom.orders,
        axes=(x1, x2, x3),
        has_potential=True,
        interfaces={
            "l": left[not_ext[left]],
            "r": right[not_ext[right]],
            "t": contact,
        },
        gamma_ext=bottom,
        gamma_m=contact,
        damping_spec=DampingSpec(
            d_pml=geom.pml_thickness,
            x3_bottom=-geom.depth,
            profile=geom.damping_profile,
            amplitude=geom.damping_amplitude,
        ),
    )

    # electrode: x1/x2 axes are slices of the substrate axes so contact
    # coordinates coincide bitwise
    ne1, ne2, ne3 = geom.electrode_nodes
    want = np.linspace(off, off + geom.electrode_width, ne1)
    ex1 = np.empty(ne1)
    for i, v in enumerate(want):
        j = np.argmin(np.abs(x1 - v))
        if abs(x1[j] - v) > tol:
            raise MeshResolutionError(
                "electrode x1 nodes do not align with substrate top nodes "
                f"(wanted {v!r}, nearest substrate node {x1[j]!r})"
            )
        ex1[i] = x1[j]
    if ne2 != n2:
        raise MeshResolutionError(
            f"electrode x2 count {ne2} must match substrate x2 count {n2}"
        )
    ex3 = _axis_from_segments(
        [(0.0, geom.electrode_height, ne3)], geom.orders[2], "electrode x3"
    )
    ecoords, eelems, egrids = _grid(ex1, x2.copy(), ex3, geom.orders)
    ebottom = _face_nodes(egrids, 2, 0)
    if ebottom.size != contact.size:
        raise MeshResolutionError(
            f"electrode contact has {ebottom.size} nodes, substrate side {contact.size}"
        )
    if not np.allclose(ecoords[ebottom, :2], coords[contact, :2], atol=tol, rtol=0.0):
        raise MeshResolutionError("electrode bottom nodes do not coincide with Gamma_m")

    electrode = SubregionMesh(
        label="electrode",
        coords=ecoords,
        elems=eelems,
        orders=geom.orders,
        axes=(ex1, x2.copy(), ex3),
        has_potential=False,
        interfaces={"b": ebottom},
        damping_spec=NO_DAMPING,
    )
    return substrate, electrode


def build_side_block(side, geom):
    """Mesh of one absorbing side column including its bottom corner.

    Local coordinates put the junction with the physical domain at
    x1 = 0: the left block spans [-pml_thickness, 0], the right block
    [0, pml_thickness].  The face at x1 = 0 is the interface ('r' for
    the left block, 'l' for the right block) and matches the unit
    cell's corresponding interface node-for-node after translation.
    """
    if side not in ("left", "right"):
        raise GeometryError(f"side must be 'left' or 'right', got {side!r}")
    _, n2, n3 = geom.substrate_nodes
    if side == "left":
        seg1 = (-geom.pml_thickness, 0.0, geom.pml_nodes)
    else:
        seg1 = (0.0, geom.pml_thickness, geom.pml_nodes)
    x1 = _axis_from_segments([seg1], geom.orders[0], f"{side} x1")
    x2 = _axis_from_segments([(0.0, geom.width, n2)], geom.orders[1], f"{side} x2")
    x3 = _axis_from_segments(
        [
            (-(geom.depth + geom.pml_thickness), -geom.depth, geom.pml_nodes),
            (-geom.depth, 0.0, n3),
        ],
        geom.orders[2],
        f"{side} x3",
    )
    coords, elems, grids = _grid(x1, x2, x3, geom.orders)

    bottom = _face_nodes(grids, 2, 0)
    outer = _face_nodes(grids, 0, 0 if side == "left" else len(x1) - 1)
    inner = _face_nodes(grids, 0, len(x1) - 1 if side == "left" else 0)
    gamma_ext = np.unique(np.concatenate([bottom, outer]))
    not_ext = ~np.isin(np.arange(coords.shape[0]), gamma_ext)

    return SubregionMesh(
        label=side,
        coords=coords,
        elems=elems,
        orders=geom.orders,
        axes=(x1, x2, x3),
        has_potential=True,
        interfaces={("r" if side == "left" else "l"): inner[not_ext[inner]]},
        gamma_ext=gamma_ext,
        damping_spec=DampingSpec(
            d_pml=geom.pml_thickness,
            x1_left=0.0 if side == "left" else None,
            x1_right=0.0 if side == "right" else None,
            x3_bottom=-geom.depth,
            profile=geom.damping_profile,
            amplitude=geom.damping_amplitude,
        ),
    )


def cell_offset(geom, m):
    """x1 translation of cell instance m (1-based) from cell-local coords."""
    return (m - 1) * geom.pitch


def check_interface_match(mesh_a, side_a, offset_a, mesh_b, side_b, offset_b, tol):
    """Verify two interface node lists coincide after x1 translation."""
    na = mesh_a.interfaces[side_a]
    nb = mesh_b.interfaces[side_b]
    if na.size != nb.size:
        raise GeometryError(
            f"interface size mismatch: {mesh_a.label}.{side_a} has {na.size}, "
            f"{mesh_b.label}.{side_b} has {nb.size}"
        )
    ca = mesh_a.coords[na] + np.array([offset_a, 0.0, 0.0])
    cb = mesh_b.coords[nb] + np.array([offset_b, 0.0, 0.0])
    if not np.allclose(ca, cb, atol=tol, rtol=0.0):
        raise GeometryError(
            f"interfaces {mesh_a.label}.{side_a} and {mesh_b.label}.{side_b} "
            "do not coincide"
        )
