"""Monolithic reference FEM over the whole truncated domain.

Assembles every subregion instance into one coupled system with shared
interface DOFs and solves it directly.  It exists as the ground truth
for the decomposed path at desk scale: it reuses the same element
kernels, so any disagreement isolates the tearing/interconnect logic
rather than quadrature.  It is deliberately not built to scale.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from . import geometry, qtsolver
from .assembly import AssemblyError, basis_tables, element_dofs, element_matrix
from .feti import FieldSolution, SolveStats, SubregionField
from .linalg import sparse_factorize
from .scaling import nondimensionalize


class DofCapError(ValueError):
    """The monolithic system would exceed the configured DOF cap."""


@dataclass
class GlobalSystem:
    """Unified operator, load and DOF bookkeeping of the whole device.

    ``instances`` lists (label, mesh, x1 offset, local-full-dof ->
    global-full-dof map, contact voltage).  ``free_dofs`` indexes the
    unconstrained global DOFs, ``dirichlet`` the constrained values.
    """

    K: sp.csc_matrix
    F: np.ndarray
    instances: list
    n_global_dofs: int
    free_dofs: np.ndarray
    dirichlet: np.ndarray
    field_scale: tuple = (1.0, 1.0)
    length_scale: float = 1.0

    @property
    def n_free(self):
        return self.free_dofs.size


def _instances(geom, meshes, n_cells, voltages):
    cell, elec, left, right = meshes
    out = [("left", left, 0.0, 0.0)]
    width = max(2, len(str(n_cells)))
    for m in range(1, n_cells + 1):
        off = geometry.cell_offset(geom, m)
        out.append((f"cell_{m:0{width}d}", cell, off, voltages[m - 1]))
        out.append((f"electrode_{m:0{width}d}", elec, off, 0.0))
    out.append(("right", right, n_cells * geom.pitch, 0.0))
    return out


def _global_nodes(placed, tol):
    """Merge coincident nodes across instances into global node ids."""
    coords = np.vstack([mesh.coords + np.array([off, 0.0, 0.0])
                        for _, mesh, off, _ in placed])
    tree = cKDTree(coords)
    pairs = np.array(sorted(tree.query_pairs(r=tol)), dtype=int)
    n = coords.shape[0]
    if pairs.size:
        adj = sp.coo_matrix(
            (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)
        )
        n_comp, labels = connected_components(adj, directed=False)
    else:
        n_comp, labels = n, np.arange(n)
    # renumber components by first appearance for deterministic ordering
    order = np.full(n_comp, -1, dtype=int)
    nxt = 0
    for lab in labels:
        if order[lab] < 0:
            order[lab] = nxt
            nxt += 1
    return order[labels], nxt


def assemble_monolithic_scaled(geom, substrate, electrode_mat, omega,
                               voltages, dof_cap=200_000):
    """Assemble the whole device in already-scaled quantities.

    ``voltages`` are the (scaled) per-cell contact values.  Element
    matrices are computed once per subregion type and reused for every
    translated instance (translations change neither Jacobians nor the
    damping factors, which only depend on depth inside each layer).
    """
    n_cells = len(voltages)
    cell_mesh, elec_mesh = geometry.build_unit_cell(geom)
    left_mesh = geometry.build_side_block("left", geom)
    right_mesh = geometry.build_side_block("right", geom)
    placed = _instances(
        geom, (cell_mesh, elec_mesh, left_mesh, right_mesh), n_cells, voltages
    )

    node_ids, n_gnodes = _global_nodes(placed, geom.match_tol)

    # potential DOFs exist wherever a piezoelectric instance owns the node
    has_phi = np.zeros(n_gnodes, dtype=bool)
    base = 0
    for _, mesh, _, _ in placed:
        if mesh.has_potential:
            has_phi[node_ids[base : base + mesh.n_nodes]] = True
        base += mesh.n_nodes
    phi_dof = np.full(n_gnodes, -1, dtype=int)
    phi_dof[has_phi] = 3 * n_gnodes + np.arange(int(has_phi.sum()))
    n_gdofs = 3 * n_gnodes + int(has_phi.sum())
    if n_gdofs > dof_cap:
        raise DofCapError(f"{n_gdofs} global DOFs exceed the cap {dof_cap}")

    # per-instance local-full-dof -> global-full-dof maps
    instances = []
    base = 0
    for label, mesh, off, voltage in placed:
        gids = node_ids[base : base + mesh.n_nodes]
        base += mesh.n_nodes
        dof_map = np.empty(mesh.n_dofs, dtype=int)
        dof_map[0 : 3 * mesh.n_nodes : 3] = 3 * gids
        dof_map[1 : 3 * mesh.n_nodes : 3] = 3 * gids + 1
        dof_map[2 : 3 * mesh.n_nodes : 3] = 3 * gids + 2
        if mesh.has_potential:
            dof_map[3 * mesh.n_nodes :] = phi_dof[gids]
            if (dof_map[3 * mesh.n_nodes :] < 0).any():
                raise AssemblyError("potential DOF missing on a piezoelectric node")
        instances.append((label, mesh, off, dof_map, voltage))

    # element matrices per subregion type
    cache = {}
    for mesh, material in (
        (cell_mesh, substrate), (elec_mesh, electrode_mat),
        (left_mesh, substrate), (right_mesh, substrate),
    ):
        tables = basis_tables(tuple(mesh.orders))
        mats = [
            element_matrix(mesh.coords[conn], material, omega,
                           mesh.damping_spec, tables)
            for conn in mesh.elems
        ]
        dofs = [element_dofs(mesh, conn) for conn in mesh.elems]
        cache[mesh.label] = (dofs, mats)

    rows, cols, vals = [], [], []
    for _, mesh, _, dof_map, _ in instances:
        edofs_list, emats = cache[mesh.label]
        for edofs, emat in zip(edofs_list, emats):
            gdofs = dof_map[edofs]
            rr, cc = np.meshgrid(gdofs, gdofs, indexing="ij")
            rows.append(rr.ravel())
            cols.append(cc.ravel())
            vals.append(emat.ravel())
    k_full = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_gdofs, n_gdofs),
    ).tocsr()
    if not np.isfinite(k_full.data).all():
        raise AssemblyError("non-finite entry in monolithic operator")

    # Dirichlet data: exterior zeros plus per-cell contact voltages
    dirichlet = np.full(n_gdofs, np.nan, dtype=complex)
    for _, mesh, _, dof_map, voltage in instances:
        for node in mesh.gamma_ext:
            dirichlet[dof_map[3 * node : 3 * node + 3]] = 0.0
            if mesh.has_potential:
                dirichlet[dof_map[3 * mesh.n_nodes + node]] = 0.0
        for node in mesh.gamma_m:
            dirichlet[dof_map[3 * mesh.n_nodes + node]] = voltage

    constrained = ~np.isnan(dirichlet.real)
    free = np.nonzero(~constrained)[0]
    g = np.where(constrained, dirichlet, 0.0).astype(complex)
    f = -(k_full[free] @ g)
    return GlobalSystem(
        K=k_full[free][:, free].tocsc(),
        F=np.asarray(f).ravel(),
        instances=instances,
        n_global_dofs=n_gdofs,
        free_dofs=free,
        dirichlet=dirichlet,
    )


def assemble_monolithic(cfg, dof_cap=200_000):
    """Assemble from a ProblemConfig, scaled exactly like the FETI path."""
    s = cfg.scales
    sub_scaled, omega_bar, _ = nondimensionalize(cfg.substrate, cfg.omega, [], s)
    elec_scaled, _, _ = nondimensionalize(cfg.electrode, cfg.omega, [], s)
    geom_scaled = cfg.geometry_m.scaled(1.0 / s.l1)
    volt_scaled = [v * s.potential_factor for v in cfg.voltages]
    gs = assemble_monolithic_scaled(
        geom_scaled, sub_scaled, elec_scaled, omega_bar, volt_scaled, dof_cap
    )
    gs.field_scale = (s.displacement_factor, s.potential_factor)
    gs.length_scale = s.l1
    return gs


def solve_monolithic(gs):
    """Direct sparse solve, scattered back to per-subregion fields."""
    t0 = time.perf_counter()
    fact = sparse_factorize(gs.K)
    x_free = fact.solve(gs.F)
    elapsed = time.perf_counter() - t0

    x = np.where(~np.isnan(gs.dirichlet.real), gs.dirichlet, 0.0).astype(complex)
    x[gs.free_dofs] = x_free

    ua, pb = gs.field_scale
    subregions = {}
    for label, mesh, off, dof_map, _ in gs.instances:
        local = x[dof_map]
        u = local[: 3 * mesh.n_nodes].reshape(-1, 3)
        phi = local[3 * mesh.n_nodes :] if mesh.has_potential else None
        coords = (mesh.coords + np.array([off, 0.0, 0.0])) * gs.length_scale
        subregions[label] = SubregionField(
            label=label,
            coords=coords,
            u=u / ua,
            phi=None if phi is None else phi / pb,
        )
    residual = float(
        np.linalg.norm(gs.K @ x_free - gs.F) / max(np.linalg.norm(gs.F), 1e-300)
    )
    return FieldSolution(
        subregions=subregions,
        lam=np.empty(0, dtype=complex),
        stats=SolveStats(),
        report=qtsolver.IterationReport(),
        timings={"total runtime": elapsed},
        multiplier_residual=residual,
    )
