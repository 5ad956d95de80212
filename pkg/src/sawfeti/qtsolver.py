"""Direct solver for the block tridiagonal quasi-Toeplitz multiplier system.

The system

    [[M_L, B^T          ], [lam_0]   [b_L ]
     [B,   M,   B^T     ], [lam_1] = [b_1 ]
     [        ...       ],  ...       ...
     [        B,   M_R  ]] [lam_N]   [b_N ]

is a Toeplitz block tridiagonal matrix with a rank-n_m perturbation in
the first diagonal block.  A Toeplitz factorization L*Lam*L^T needs
(L1, Lam1, Lam2) with L1*Lam1 = B, L1*Lam1*L1^T + Lam1 = M and
L1*Lam1*L1^T + Lam2 = M_R; Lam1 comes from the nonlinear matrix equation
B*Lam1^{-1}*B^T + Lam1 = M, solved here by a structured doubling
iteration whose limit seeds a Newton iteration on the equivalent
quadratic matrix equation Q(Y) = -B^T + M*Y - B*Y^2 = 0.  The first-block
perturbation is then undone with the Sherman-Morrison-Woodbury identity
in a single forward/backward block sweep, O(N*n_m^2) per right-hand side.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from .linalg import frobenius_norm, sylvester_generalized_solve


class ConvergenceError(RuntimeError):
    """An iteration hit its bound without meeting its tolerance."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


DEFAULT_EPS_D = 1e-10
DEFAULT_EPS_N = 1e-10
DEFAULT_ITER_MAX = 50


@dataclass
class QTSystem:
    """Blocks and right-hand side of the padded multiplier system.

    All four blocks are square of size n_m; ``rhs`` has (n_blocks + 1)*n_m
    rows and may carry several columns.
    """

    M_L: np.ndarray
    M: np.ndarray
    M_R: np.ndarray
    B: np.ndarray
    n_blocks: int
    rhs: np.ndarray

    def __post_init__(self):
        n = self.M.shape[0]
        for name in ("M_L", "M", "M_R", "B"):
            blk = np.asarray(getattr(self, name), dtype=complex)
            if blk.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}, got {blk.shape}")
            setattr(self, name, blk)
        self.rhs = np.asarray(self.rhs, dtype=complex)
        if self.rhs.shape[0] != (self.n_blocks + 1) * n:
            raise ValueError(
                f"rhs has {self.rhs.shape[0]} rows, expected {(self.n_blocks + 1) * n}"
            )

    @property
    def block_size(self):
        return self.M.shape[0]

    def dense(self):
        """Assembled (N+1)*n_m square matrix (testing and the dense path)."""
        n, nb = self.block_size, self.n_blocks
        full = np.zeros(((nb + 1) * n, (nb + 1) * n), dtype=complex)
        for i in range(nb + 1):
            if i == 0:
                diag = self.M_L
            elif i == nb:
                diag = self.M_R
            else:
                diag = self.M
            full[i * n : (i + 1) * n, i * n : (i + 1) * n] = diag
            if i < nb:
                full[(i + 1) * n : (i + 2) * n, i * n : (i + 1) * n] = self.B
                full[i * n : (i + 1) * n, (i + 1) * n : (i + 2) * n] = self.B.T
        return full

    def save(self, path):
        np.savez_compressed(
            path, M_L=self.M_L, M=self.M, M_R=self.M_R, B=self.B,
            n_blocks=self.n_blocks, rhs=self.rhs,
        )

    @classmethod
    def load(cls, path):
        data = np.load(path)
        return cls(
            M_L=data["M_L"], M=data["M"], M_R=data["M_R"], B=data["B"],
            n_blocks=int(data["n_blocks"]), rhs=data["rhs"],
        )


@dataclass
class IterationReport:
    """Iteration counts, residual histories and the final equation error."""

    n_double: int = 0
    n_newton: int = 0
    rho_double: list = field(default_factory=list)
    rho_newton: list = field(default_factory=list)
    err: float = float("nan")
    converged: bool = True


@dataclass
class QTFactorization:
    """Toeplitz factors plus the low-rank first-block correction."""

    Lam1: np.ndarray
    Lam2: np.ndarray
    L1: np.ndarray
    M1: np.ndarray  # M_L - Lam1
    report: IterationReport

    def residuals(self, system):
        """The three defining relative residuals (B, M, M_R equations)."""
        core = self.L1 @ self.Lam1 @ self.L1.T
        return (
            frobenius_norm(self.L1 @ self.Lam1 - system.B) / frobenius_norm(system.B)
            if frobenius_norm(system.B) else 0.0,
            frobenius_norm(core + self.Lam1 - system.M) / frobenius_norm(system.M),
            frobenius_norm(core + self.Lam2 - system.M_R) / frobenius_norm(system.M_R),
        )


def rho_double(lam_new, lam_old):
    """Relative step size of the doubling iteration."""
    return frobenius_norm(lam_new - lam_old) / frobenius_norm(lam_old)


def qme_residual(y, m, b):
    """Q(Y) = -B^T + M Y - B Y^2 and its normalized residual rho_N."""
    q = -b.T + m @ y - b @ (y @ y)
    ny = frobenius_norm(y)
    denom = frobenius_norm(b) * ny**2 + frobenius_norm(m) * ny + frobenius_norm(b.T)
    return q, frobenius_norm(q) / denom if denom else 0.0


def equation_error(lam, m, b):
    """Err = ||B Lam^{-1} B^T + Lam - M||_F / ||M||_F."""
    x = np.linalg.solve(lam, b.T)
    return frobenius_norm(b @ x + lam - m) / frobenius_norm(m)


def double_method(m, b, eps_d=DEFAULT_EPS_D, max_iters=DEFAULT_ITER_MAX):
    """Structured doubling iteration for B Lam^{-1} B^T + Lam = M.

    Starts from B0 = B^T, Lam0 = M, P0 = 0 and stops when the relative
    step rho_D drops below ``eps_d`` or after ``max_iters`` steps; the
    inner inverse (Lam - P)^{-1} is factored once per step and applied
    three times.

    Returns (Lam, IterationReport); ``report.converged`` is False when
    the step bound was hit.
    """
    m = np.asarray(m, dtype=complex)
    b = np.asarray(b, dtype=complex)
    bk = b.T.copy()
    lam = m.copy()
    p = np.zeros_like(m)
    report = IterationReport()
    for k in range(1, max_iters + 1):
        lu, piv = spla.lu_factor(lam - p, check_finite=False)
        sb = spla.lu_solve((lu, piv), bk, check_finite=False)      # (Lam-P)^-1 B
        sbt = spla.lu_solve((lu, piv), bk.T, check_finite=False)   # (Lam-P)^-1 B^T
        lam_new = lam - bk.T @ sb
        p = p + bk @ sbt
        bk = bk @ sb
        step = rho_double(lam_new, lam)
        report.rho_double.append(step)
        report.n_double = k
        lam = lam_new
        if step < eps_d:
            return lam, report
    report.converged = False
    return lam, report


def newton_qme(m, b, y0, eps_n=DEFAULT_EPS_N, iter_max=DEFAULT_ITER_MAX):
    """Newton iteration on Q(Y) = -B^T + M Y - B Y^2 = 0.

    Each step solves the generalized Sylvester equation
    B E Y + (B Y - M) E = Q(Y) and updates Y <- Y + E.  Terminates when
    the normalized residual rho_N(Y) <= eps_n (checked before stepping,
    so a root returns with zero iterations) or at ``iter_max`` steps.
    """
    m = np.asarray(m, dtype=complex)
    b = np.asarray(b, dtype=complex)
    y = np.asarray(y0, dtype=complex).copy()
    report = IterationReport()
    for k in range(iter_max + 1):
        q, rho = qme_residual(y, m, b)
        report.rho_newton.append(rho)
        if rho <= eps_n:
            report.n_newton = k
            return y, report
        if k == iter_max:
            break
        e = sylvester_generalized_solve(b @ y - m, b, y, q)
        y = y + e
        report.n_newton = k + 1
    report.converged = False
    return y, report


def double_newton(m, b, eps_d=DEFAULT_EPS_D, eps_n=DEFAULT_EPS_N,
                  iter_max=DEFAULT_ITER_MAX):
    """Doubling-seeded Newton solve of B Lam^{-1} B^T + Lam = M.

    The doubling limit Lam* provides the starting point Y0 = Lam*^{-1} B^T
    for the quadratic-matrix-equation Newton iteration; the refined root
    is mapped back through Lam* = M - B Y.  The report carries both
    iteration histories and Err.
    """
    m = np.asarray(m, dtype=complex)
    b = np.asarray(b, dtype=complex)
    lam, rep_d = double_method(m, b, eps_d, iter_max)
    y0 = np.linalg.solve(lam, b.T)
    y, rep_n = newton_qme(m, b, y0, eps_n, iter_max)
    lam = m - b @ y
    report = IterationReport(
        n_double=rep_d.n_double,
        n_newton=rep_n.n_newton,
        rho_double=rep_d.rho_double,
        rho_newton=rep_n.rho_newton,
        err=equation_error(lam, m, b),
        converged=rep_d.converged and rep_n.converged,
    )
    return lam, report


def newton_direct(m, b, lam0=None, tol=1e-10, iter_max=DEFAULT_ITER_MAX):
    """Plain Newton iteration on F(Lam) = B Lam^{-1} B^T + Lam - M = 0.

    Comparison variant: each step solves E - (B Lam^{-1}) E (Lam^{-1} B^T)
    = -F(Lam) and stops when the relative step drops below ``tol``.
    """
    m = np.asarray(m, dtype=complex)
    b = np.asarray(b, dtype=complex)
    lam = m.copy() if lam0 is None else np.asarray(lam0, dtype=complex).copy()
    report = IterationReport()
    for k in range(1, iter_max + 1):
        x = np.linalg.solve(lam, b.T)          # Lam^{-1} B^T
        f = b @ x + lam - m
        e = sylvester_generalized_solve(
            np.eye(lam.shape[0], dtype=complex), -x.T, x, -f
        )
        lam = lam + e
        step = frobenius_norm(e) / frobenius_norm(lam)
        report.rho_double.append(step)
        report.n_double = k
        if step < tol:
            report.err = equation_error(lam, m, b)
            return lam, report
    report.converged = False
    report.err = equation_error(lam, m, b)
    return lam, report


def complete_factorization(lam1, system, report=None):
    """Factors (L1, Lam1, Lam2, M1) from the matrix-equation root Lam1."""
    lam1 = np.asarray(lam1, dtype=complex)
    l1 = np.linalg.solve(lam1.T, system.B.T).T          # L1 Lam1 = B
    lam2 = system.M_R - l1 @ lam1 @ l1.T
    m1 = system.M_L - lam1
    return QTFactorization(
        Lam1=lam1, Lam2=lam2, L1=l1, M1=m1,
        report=report if report is not None else IterationReport(),
    )


def factorize(system, eps_d=DEFAULT_EPS_D, eps_n=DEFAULT_EPS_N,
              iter_max=DEFAULT_ITER_MAX):
    """Factor a QTSystem via the doubling-seeded Newton iteration."""
    lam1, report = double_newton(system.M, system.B, eps_d, eps_n, iter_max)
    return complete_factorization(lam1, system, report)


def smw_solve(fact, system):
    """Solve the padded system through the factorization and the SMW update.

    The Toeplitz part L*Lam*L^T is inverted by one forward block sweep,
    one block-diagonal solve and one backward sweep, applied to the
    right-hand side and the first-block identity columns in a single
    pass; the rank-n_m correction then costs one small dense solve.
    Returns the solution with the same column shape as ``system.rhs``.
    """
    n, nb = system.block_size, system.n_blocks
    rhs = system.rhs if system.rhs.ndim == 2 else system.rhs[:, None]
    q = rhs.shape[1]

    f = np.zeros(((nb + 1) * n, q + n), dtype=complex)
    f[:, :q] = rhs
    f[:n, q:] = np.eye(n)

    l1 = fact.L1
    for i in range(1, nb + 1):
        f[i * n : (i + 1) * n] -= l1 @ f[(i - 1) * n : i * n]

    # block-diagonal solve: blocks 1..N share Lam1, the last uses Lam2
    head = f[: nb * n].reshape(nb, n, q + n)
    stacked = np.concatenate(list(head), axis=1)        # n x nb*(q+n)
    if stacked.shape[1] >= n:
        stacked = np.linalg.inv(fact.Lam1) @ stacked
    else:
        stacked = np.linalg.solve(fact.Lam1, stacked)
    for i in range(nb):
        f[i * n : (i + 1) * n] = stacked[:, i * (q + n) : (i + 1) * (q + n)]
    f[nb * n :] = np.linalg.solve(fact.Lam2, f[nb * n :])

    for i in range(nb - 1, -1, -1):
        f[i * n : (i + 1) * n] -= l1.T @ f[(i + 1) * n : (i + 2) * n]

    g = f[:, :q]            # (L Lam L^T)^{-1} rhs
    h = f[:, q:]            # (L Lam L^T)^{-1} E1
    z = np.eye(n, dtype=complex) + fact.M1 @ h[:n]
    try:
        z = np.linalg.solve(z, fact.M1)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"singular SMW correction matrix ({exc})") from exc
    sol = g - h @ (z @ g[:n])
    return sol if system.rhs.ndim == 2 else sol[:, 0]


def qt_dense_oracle(system, size_cap=200_000):
    """Banded direct solve of the assembled block tridiagonal matrix."""
    n, nb = system.block_size, system.n_blocks
    size = (nb + 1) * n
    if size > size_cap:
        raise ValueError(f"system size {size} exceeds the dense-path cap {size_cap}")
    band = 2 * n - 1
    ab = np.zeros((2 * band + 1, size), dtype=complex)
    full = system.dense()
    for d in range(-band, band + 1):
        diag = np.diagonal(full, offset=d)
        ab[band - d, max(d, 0) : max(d, 0) + diag.size] = diag
    rhs = system.rhs if system.rhs.ndim == 2 else system.rhs[:, None]
    sol = spla.solve_banded((band, band), ab, rhs, check_finite=False)
    return sol if system.rhs.ndim == 2 else sol[:, 0]


def relative_residual(system, lam):
    """||A lam - rhs|| / ||rhs|| of a candidate solution."""
    full = system.dense()
    lam2 = lam if lam.ndim == 2 else lam[:, None]
    rhs = system.rhs if system.rhs.ndim == 2 else system.rhs[:, None]
    return float(np.linalg.norm(full @ lam2 - rhs) / np.linalg.norm(rhs))


def synthetic_system(block_size, n_blocks, seed=0, rhs_cols=1, coupling=0.4):
    """Random diagonally dominant complex symmetric test system."""
    rng = np.random.default_rng(seed)

    def cgauss(shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)

    def sym(a):
        return 0.5 * (a + a.T)

    n = block_size
    base = sym(cgauss((n, n))) + 4.0 * np.eye(n)
    b = coupling * cgauss((n, n))
    return QTSystem(
        M_L=base + sym(cgauss((n, n))) * 0.5,
        M=base,
        M_R=base + sym(cgauss((n, n))) * 0.5,
        B=b,
        n_blocks=n_blocks,
        rhs=cgauss(((n_blocks + 1) * n, rhs_cols)) if rhs_cols > 1
        else cgauss((n_blocks + 1) * n),
    )


def compare_methods(system, tol=1e-10, iter_max=DEFAULT_ITER_MAX):
    """Run all four iteration variants on B Lam^{-1} B^T + Lam = M.

    Variants: the doubling-seeded Newton combination, the doubling
    iteration alone, Newton on the quadratic matrix equation (seeded by
    M^{-1} B^T, step-difference termination), and plain Newton on the
    equation itself (seeded by M).  Per-method failures are recorded in
    the row, not raised.  Returns a list of dict rows with keys method,
    time_s, err, iterations, converged and optionally error.
    """
    m, b = system.M, system.B

    def run_double_newton():
        lam, rep = double_newton(m, b, tol, tol, iter_max)
        return rep.err, rep.n_double + rep.n_newton, rep.converged

    def run_double():
        lam, rep = double_method(m, b, tol, iter_max)
        return equation_error(lam, m, b), rep.n_double, rep.converged

    def run_newton_qme():
        y = np.linalg.solve(m, b.T)
        for k in range(1, iter_max + 1):
            q, _ = qme_residual(y, m, b)
            e = sylvester_generalized_solve(b @ y - m, b, y, q)
            y = y + e
            if frobenius_norm(e) / frobenius_norm(y) < tol:
                return equation_error(m - b @ y, m, b), k, True
        return equation_error(m - b @ y, m, b), iter_max, False

    def run_newton_direct():
        lam, rep = newton_direct(m, b, tol=tol, iter_max=iter_max)
        return rep.err, rep.n_double, rep.converged

    rows = []
    for name, fn in (
        ("double-newton", run_double_newton),
        ("double", run_double),
        ("newton-qme", run_newton_qme),
        ("newton-direct", run_newton_direct),
    ):
        t0 = time.perf_counter()
        try:
            err, iters, converged = fn()
            rows.append({
                "method": name, "time_s": time.perf_counter() - t0,
                "err": err, "iterations": iters, "converged": converged,
            })
        except Exception as exc:
            rows.append({
                "method": name, "time_s": time.perf_counter() - t0,
                "err": float("nan"), "iterations": 0, "converged": False,
                "error": str(exc),
            })
    return rows


def solve_qt_system(system, method="double-newton", eps_d=DEFAULT_EPS_D,
                    eps_n=DEFAULT_EPS_N, iter_max=DEFAULT_ITER_MAX):
    """One-call solve of a QTSystem.

    ``method`` is 'dense' (banded direct) or 'double-newton'
    (factorization plus SMW sweep).  Returns (solution, IterationReport,
    timings dict).
    """
    timings = {}
    if method == "dense":
        t0 = time.perf_counter()
        sol = qt_dense_oracle(system)
        timings["solve multipliers"] = time.perf_counter() - t0
        return sol, IterationReport(), timings
    if method != "double-newton":
        raise ValueError(f"unknown method {method!r}")
    t0 = time.perf_counter()
    fact = factorize(system, eps_d, eps_n, iter_max)
    timings["solve matrix equations"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    sol = smw_solve(fact, system)
    timings["apply SMW sweep"] = time.perf_counter() - t0
    timings["solve multipliers"] = sum(timings.values())
    return sol, fact.report, timings
