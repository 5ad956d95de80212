"""Finite element assembly of the complex symmetric subregion operators.

Piezoelectric subregions produce the saddle operator

    K = [[Kuu - Muu, Kup], [Kup^T, -Kpp]]

over [displacement DOFs, potential DOFs]; electrodes produce the purely
elastic Kuu - Muu.  Absorbing layers enter through the complex stretch
factors alpha_k sampled at quadrature points: stiffness-type integrands
carry alpha1*alpha2*alpha3/(alpha_j*alpha_k), the mass integrand carries
alpha1*alpha2*alpha3.  Exterior Dirichlet DOFs are eliminated; the
electrode-contact potential condition is eliminated into a load vector
(lift) that is linear in the applied voltage.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import geometry
from .linalg import sparse_factorize


class AssemblyError(ValueError):
    """Non-finite entries (degenerate element or bad material data)."""


class MissingContactError(ValueError):
    """Voltage lift requested on a mesh without electrode-contact faces."""


def _lagrange_1d(order):
    """Nodes, and callables giving values/derivatives of the 1D basis."""
    nodes = np.linspace(-1.0, 1.0, order + 1)

    def values(x):
        out = np.ones((len(x), order + 1))
        for i in range(order + 1):
            for j in range(order + 1):
                if j != i:
                    out[:, i] *= (x - nodes[j]) / (nodes[i] - nodes[j])
        return out

    def derivs(x):
        out = np.zeros((len(x), order + 1))
        for i in range(order + 1):
            for j in range(order + 1):
                if j == i:
                    continue
                term = np.full(len(x), 1.0 / (nodes[i] - nodes[j]))
                for k in range(order + 1):
                    if k != i and k != j:
                        term *= (x - nodes[k]) / (nodes[i] - nodes[k])
                out[:, i] += term
        return out

    return nodes, values, derivs


@lru_cache(maxsize=None)
def basis_tables(orders):
    """Quadrature and tensor-product basis tables for given element orders.

    Returns (points, weights, N, dN) with N of shape (nq, nen) and dN of
    shape (nq, nen, 3); the Gauss rule uses order+1 points per direction.
    Local node ordering is lexicographic with the first direction fastest,
    matching the mesh connectivity.
    """
    rules = [np.polynomial.legendre.leggauss(p + 1) for p in orders]
    bases = [_lagrange_1d(p) for p in orders]

    vals = [b[1](r[0]) for b, r in zip(bases, rules)]
    ders = [b[2](r[0]) for b, r in zip(bases, rules)]

    nq = [len(r[0]) for r in rules]
    nn = [p + 1 for p in orders]
    n_q = nq[0] * nq[1] * nq[2]
    n_en = nn[0] * nn[1] * nn[2]

    pts = np.empty((n_q, 3))
    wts = np.empty(n_q)
    n_tab = np.empty((n_q, n_en))
    d_tab = np.empty((n_q, n_en, 3))
    q = 0
    for q3 in range(nq[2]):
        for q2 in range(nq[1]):
            for q1 in range(nq[0]):
                pts[q] = (rules[0][0][q1], rules[1][0][q2], rules[2][0][q3])
                wts[q] = rules[0][1][q1] * rules[1][1][q2] * rules[2][1][q3]
                a = 0
                for l3 in range(nn[2]):
                    for l2 in range(nn[1]):
                        for l1 in range(nn[0]):
                            v1, v2, v3 = vals[0][q1, l1], vals[1][q2, l2], vals[2][q3, l3]
                            n_tab[q, a] = v1 * v2 * v3
                            d_tab[q, a, 0] = ders[0][q1, l1] * v2 * v3
                            d_tab[q, a, 1] = v1 * ders[1][q2, l2] * v3
                            d_tab[q, a, 2] = v1 * v2 * ders[2][q3, l3]
                            a += 1
                q += 1
    return pts, wts, n_tab, d_tab


def element_matrix(xe, material, omega, damping_spec, tables):
    """Full element matrix on one hex: saddle blocks for piezo material.

    ``xe`` is (nen, 3) node coordinates.  Returns (nen*3 + nen*piezo)
    square complex matrix in [u node-major, phi] local DOF order.
    """
    _, wts, n_tab, d_tab = tables
    nen = xe.shape[0]
    piezo = material.is_piezoelectric
    ndof = 3 * nen + (nen if piezo else 0)
    emat = np.zeros((ndof, ndof), dtype=complex)

    c, e, eps, rho = material.c, material.e, material.eps, material.rho
    for q in range(len(wts)):
        jac = xe.T @ d_tab[q]                       # dx/dxi
        det = np.linalg.det(jac)
        if det <= 0:
            raise AssemblyError("non-positive element Jacobian")
        dndx = d_tab[q] @ np.linalg.inv(jac)        # (nen, 3)
        x = n_tab[q] @ xe
        alpha = geometry.stretch(x, damping_spec)
        avol = alpha[0] * alpha[1] * alpha[2]
        g = avol / np.outer(alpha, alpha)
        w = wts[q] * det

        kuu = np.einsum("ijkl,jk,aj,bk->aibl", c, g, dndx, dndx, optimize=True)
        muu = (omega**2 * rho * avol) * np.outer(n_tab[q], n_tab[q])
        blk = kuu.reshape(3 * nen, 3 * nen)
        blk = blk - np.einsum("ab,il->aibl", muu, np.eye(3)).reshape(3 * nen, 3 * nen)
        emat[: 3 * nen, : 3 * nen] += w * blk

        if piezo:
            kup = np.einsum("kij,kj,bk,aj->aib", e, g, dndx, dndx, optimize=True)
            kup = kup.reshape(3 * nen, nen)
            kpp = np.einsum("ik,ki,bk,ai->ab", eps, g, dndx, dndx, optimize=True)
            emat[: 3 * nen, 3 * nen :] += w * kup
            emat[3 * nen :, : 3 * nen] += w * kup.T
            emat[3 * nen :, 3 * nen :] -= w * kpp
    return emat


def element_dofs(mesh, conn):
    """Full-DOF indices of one element, matching element_matrix layout."""
    dofs = np.empty(3 * len(conn) + (len(conn) if mesh.has_potential else 0), dtype=int)
    for a, node in enumerate(conn):
        dofs[3 * a : 3 * a + 3] = (3 * node, 3 * node + 1, 3 * node + 2)
    if mesh.has_potential:
        dofs[3 * len(conn) :] = 3 * mesh.n_nodes + np.asarray(conn)
    return dofs


def assemble_full(mesh, material, omega, damping_spec=None):
    """Operator over all DOFs of a mesh (no boundary conditions applied)."""
    if damping_spec is None:
        damping_spec = mesh.damping_spec
    if material.is_piezoelectric != mesh.has_potential:
        raise AssemblyError(
            "material/mesh mismatch: potential DOFs require a piezoelectric material"
        )
    tables = basis_tables(tuple(mesh.orders))
    rows, cols, vals = [], [], []
    for conn in mesh.elems:
        emat = element_matrix(mesh.coords[conn], material, omega, damping_spec, tables)
        edofs = element_dofs(mesh, conn)
        rr, cc = np.meshgrid(edofs, edofs, indexing="ij")
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        vals.append(emat.ravel())
    k = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.n_dofs, mesh.n_dofs),
    ).tocsr()
    if not np.isfinite(k.data).all():
        raise AssemblyError("non-finite entry in assembled operator")
    return k


@dataclass
class SubregionSystem:
    """Constrained operator of one subregion plus its voltage lifts.

    ``K`` acts on the free DOFs of ``mesh``; ``lift_base`` is the load
    vector for a unit contact voltage (F(v) = v * lift_base), None when
    the mesh has no electrode contact.  The factorization handle is
    built on first use and reused for every subsequent solve.
    """

    mesh: "geometry.SubregionMesh"
    K: sp.csc_matrix
    lift_base: np.ndarray | None = None

    def __post_init__(self):
        self._fact = None

    @property
    def n(self):
        return self.K.shape[0]

    @property
    def factorization(self):
        if self._fact is None:
            self._fact = sparse_factorize(self.K)
        return self._fact

    def lift(self, voltage):
        """Load vector moving the contact Dirichlet value to the right side."""
        if self.lift_base is None:
            raise MissingContactError(
                f"{self.mesh.label!r} has no electrode-contact face"
            )
        return voltage * self.lift_base

    def solve(self, b):
        return self.factorization.solve(b)

    def full_solution(self, x_free, voltage=0.0):
        """Scatter a free-DOF solution to all DOFs, re-adding Dirichlet data."""
        full = np.zeros(self.mesh.n_dofs, dtype=complex)
        full[self.mesh.free_dofs] = x_free
        if self.mesh.gamma_m.size:
            full[3 * self.mesh.n_nodes + self.mesh.gamma_m] = voltage
        return full


def assemble_piezo(mesh, material, omega, damping_spec=None):
    """Assemble a piezoelectric subregion (substrate cell or side column)."""
    if not material.is_piezoelectric:
        raise AssemblyError("assemble_piezo needs a piezoelectric material")
    k_full = assemble_full(mesh, material, omega, damping_spec)
    free = mesh.free_dofs
    k = k_full[free][:, free].tocsc()
    lift_base = None
    if mesh.gamma_m.size:
        contact_phi = 3 * mesh.n_nodes + mesh.gamma_m
        lift_base = -np.asarray(
            k_full[free][:, contact_phi].sum(axis=1)
        ).ravel().astype(complex)
    return SubregionSystem(mesh=mesh, K=k, lift_base=lift_base)


def assemble_electrode(mesh, material, omega):
    """Assemble an electrode subregion (elastic only, no constraints)."""
    if material.is_piezoelectric:
        raise AssemblyError("electrode material must not carry permittivity")
    if not omega > 0:
        raise AssemblyError("electrode operator is singular at omega = 0")
    k_full = assemble_full(mesh, material, omega, geometry.NO_DAMPING)
    free = mesh.free_dofs
    return SubregionSystem(mesh=mesh, K=k_full[free][:, free].tocsc())


def dirichlet_lift(system, voltage):
    """Load vector for a given contact voltage (see SubregionSystem.lift)."""
    return system.lift(voltage)
