"""Complex linear-algebra kernels shared by the whole solver.

Everything downstream works on complex *symmetric* (A = A^T, plain
transpose) operators, so there is no Cholesky-style shortcut anywhere:
dense solves use pivoted LU, sparse solves use SuperLU, and the
generalized Sylvester kernel reduces to triangular form with QZ/Schur.
"""

import numpy as np
import scipy.linalg as spla
import scipy.sparse as sp
from scipy.sparse.linalg import splu


class SingularMatrixError(ValueError):
    """A factorization hit an (almost) exactly vanishing pivot.

    ``pivot_index`` is the offending row/column when it could be located,
    else None.
    """

    def __init__(self, message, pivot_index=None):
        super().__init__(message)
        self.pivot_index = pivot_index


class IllPosedSylvesterError(ValueError):
    """An eigenvalue pairing makes a diagonal solve coefficient vanish."""


# Pivots below this magnitude are treated as exact zeros.
PIVOT_TOL = 1e-300

# Dense-fallback size cap when locating the zero pivot of a sparse matrix.
_PIVOT_LOCATE_CAP = 5000


def frobenius_norm(a):
    """Frobenius norm sqrt(trace(A A^H)) of a dense complex matrix."""
    return float(np.linalg.norm(np.asarray(a), "fro"))


def is_complex_symmetric(a, tol=1e-14):
    """True when ||A - A^T||_F <= tol * ||A||_F (plain transpose).

    Works for dense arrays and scipy sparse matrices; a zero matrix is
    symmetric by convention.
    """
    if sp.issparse(a):
        d = (a - a.T).power(2).sum() ** 0.5
        n = abs(a.power(2).sum()) ** 0.5
    else:
        a = np.asarray(a)
        d = np.linalg.norm(a - a.T)
        n = np.linalg.norm(a)
    if n == 0.0:
        return True
    return float(abs(d)) <= tol * float(abs(n))


def dense_solve(a, b):
    """Solve A X = B by LU with partial pivoting.

    Parameters
    ----------
    a : (n, n) array_like
        Square complex matrix.
    b : (n,) or (n, k) array_like
        Right-hand side(s).

    Returns
    -------
    ndarray
        X with A X = B, same trailing shape as ``b``.

    Raises
    ------
    SingularMatrixError
        When a pivot magnitude falls below PIVOT_TOL.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"rhs rows {b.shape[0]} != matrix size {a.shape[0]}")
    lu, piv = spla.lu_factor(a, check_finite=False)
    diag = np.abs(np.diag(lu))
    bad = np.nonzero(diag < PIVOT_TOL)[0]
    if bad.size:
        raise SingularMatrixError(
            f"singular matrix: pivot {bad[0]} has magnitude {diag[bad[0]]:.3e}",
            pivot_index=int(bad[0]),
        )
    return spla.lu_solve((lu, piv), b, check_finite=False)


def _locate_zero_pivot(a):
    """Best-effort index of the first vanishing pivot of a sparse matrix."""
    n = a.shape[0]
    if n > _PIVOT_LOCATE_CAP:
        return None
    lu, _ = spla.lu_factor(np.asarray(a.todense(), dtype=complex), check_finite=False)
    diag = np.abs(np.diag(lu))
    bad = np.nonzero(diag < max(PIVOT_TOL, 1e-14 * diag.max(initial=0.0)))[0]
    return int(bad[0]) if bad.size else None


class SparseFactorization:
    """Reusable LU handle for a square sparse complex matrix.

    Wraps SuperLU so that one factorization serves many right-hand
    sides.  ``solve`` accepts vectors or column blocks and counts its
    invocations (the FETI layer audits solve counts).  The handle is
    read-only after construction and safe to share across threads.
    """

    def __init__(self, a):
        a = sp.csc_matrix(a, dtype=complex)
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"matrix must be square, got shape {a.shape}")
        self.shape = a.shape
        self.n_solves = 0
        try:
            self._lu = splu(a)
        except RuntimeError as exc:
            raise SingularMatrixError(
                f"sparse factorization failed ({exc})",
                pivot_index=_locate_zero_pivot(a),
            ) from exc

    def solve(self, b):
        """Solve A x = b for one vector or a column block."""
        b = np.asarray(b, dtype=complex)
        self.n_solves += 1
        if b.ndim == 1:
            return self._lu.solve(b)
        return self._lu.solve(np.ascontiguousarray(b))


def sparse_factorize(a):
    """Factorize a square sparse complex matrix for repeated solves."""
    return SparseFactorization(a)


def sylvester_generalized_solve(a1, a2, y, c, rtol=1e-14):
    """Solve A1 E + A2 E Y = C for E.

    (A1, A2) is reduced to generalized Schur form with QZ and Y to Schur
    form; the transformed equation is then solved one column at a time by
    triangular back-substitution.

    Parameters
    ----------
    a1, a2 : (n, n) array_like
    y : (m, m) array_like
    c : (n, m) array_like
    rtol : float
        A diagonal solve coefficient below ``rtol * scale`` raises
        IllPosedSylvesterError.

    Returns
    -------
    (n, m) ndarray
    """
    a1 = np.asarray(a1, dtype=complex)
    a2 = np.asarray(a2, dtype=complex)
    y = np.asarray(y, dtype=complex)
    c = np.asarray(c, dtype=complex)
    n, m = c.shape
    if a1.shape != (n, n) or a2.shape != (n, n) or y.shape != (m, m):
        raise ValueError(
            f"inconsistent shapes: A1 {a1.shape}, A2 {a2.shape}, Y {y.shape}, C {c.shape}"
        )

    # A1 = Q S Z^H, A2 = Q T Z^H (S, T upper triangular)
    s, t, q, z = spla.qz(a1, a2, output="complex")
    # Y = U R U^H (R upper triangular)
    r, u = spla.schur(y, output="complex")

    # S G + T G R = D with G = Z^H E U, D = Q^H C U
    d = q.conj().T @ c @ u
    g = np.zeros((n, m), dtype=complex)
    scale = max(np.abs(np.diag(s)).max(initial=0.0) + np.abs(np.diag(t)).max(initial=0.0), 1.0)
    for k in range(m):
        rhs = d[:, k].copy()
        if k > 0:
            rhs -= t @ (g[:, :k] @ r[:k, k])
        coeff = s + r[k, k] * t
        small = np.abs(np.diag(coeff)) < rtol * scale
        if small.any():
            raise IllPosedSylvesterError(
                f"vanishing solve coefficient at diagonal {int(np.nonzero(small)[0][0])}, "
                f"column {k}"
            )
        g[:, k] = spla.solve_triangular(coeff, rhs, check_finite=False)
    return z @ g @ u.conj().T
