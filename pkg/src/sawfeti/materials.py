"""Material tensors: construction, validation, rotation, and file IO.

Tensors are stored in full rank form (c: 3x3x3x3, e: 3x3x3, eps: 3x3);
Voigt matrices (6x6 elasticity, 3x6 piezoelectric) are accepted at the
input boundary and expanded on load, which keeps index-mapping bugs out
of the assembly code.
"""

from dataclasses import dataclass, replace

import numpy as np

# Voigt pair -> tensor index pairs (symmetric in the pair)
_VOIGT_PAIRS = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)]

VACUUM_PERMITTIVITY = 8.8541878128e-12  # F/m


def voigt_to_elasticity(c_voigt):
    """Expand a 6x6 Voigt elasticity matrix into the full 3x3x3x3 tensor."""
    c_voigt = np.asarray(c_voigt, dtype=float)
    if c_voigt.shape != (6, 6):
        raise ValueError(f"expected 6x6 Voigt matrix, got {c_voigt.shape}")
    c = np.zeros((3, 3, 3, 3))
    for a, (i, j) in enumerate(_VOIGT_PAIRS):
        for b, (k, l) in enumerate(_VOIGT_PAIRS):
            v = c_voigt[a, b]
            for ii, jj in ((i, j), (j, i)):
                for kk, ll in ((k, l), (l, k)):
                    c[ii, jj, kk, ll] = v
    return c


def voigt_to_piezo(e_voigt):
    """Expand a 3x6 Voigt piezoelectric matrix into the full 3x3x3 tensor."""
    e_voigt = np.asarray(e_voigt, dtype=float)
    if e_voigt.shape != (3, 6):
        raise ValueError(f"expected 3x6 Voigt matrix, got {e_voigt.shape}")
    e = np.zeros((3, 3, 3))
    for k in range(3):
        for a, (i, j) in enumerate(_VOIGT_PAIRS):
            e[k, i, j] = e[k, j, i] = e_voigt[k, a]
    return e


def elasticity_to_voigt(c):
    """Contract a full elasticity tensor back to its 6x6 Voigt matrix."""
    out = np.zeros((6, 6))
    for a, (i, j) in enumerate(_VOIGT_PAIRS):
        for b, (k, l) in enumerate(_VOIGT_PAIRS):
            out[a, b] = c[i, j, k, l]
    return out


@dataclass(frozen=True)
class MaterialSet:
    """Constitutive tensors and density for one material.

    Parameters
    ----------
    c : (3, 3, 3, 3) ndarray
        Elasticity tensor (Pa); minor and major symmetries required.
    e : (3, 3, 3) ndarray
        Piezoelectric tensor (C/m^2); zero for electrodes.
    eps : (3, 3) ndarray or None
        Permittivity (F/m), symmetric positive definite; None for
        electrodes (no potential field there).
    rho : float
        Density (kg/m^3), positive.
    """

    c: np.ndarray
    e: np.ndarray
    eps: np.ndarray | None
    rho: float

    def __post_init__(self):
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float))
        object.__setattr__(self, "e", np.asarray(self.e, dtype=float))
        if self.eps is not None:
            object.__setattr__(self, "eps", np.asarray(self.eps, dtype=float))
        self.validate()

    def validate(self, tol=1e-8):
        c, e, eps = self.c, self.e, self.eps
        if c.shape != (3, 3, 3, 3):
            raise ValueError(f"c must be 3x3x3x3, got {c.shape}")
        if e.shape != (3, 3, 3):
            raise ValueError(f"e must be 3x3x3, got {e.shape}")
        scale = max(np.abs(c).max(), 1.0)
        for perm in ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)):
            if np.abs(c - c.transpose(perm)).max() > tol * scale:
                raise ValueError(f"elasticity tensor breaks symmetry {perm}")
        escale = max(np.abs(e).max(), 1.0)
        if np.abs(e - e.transpose(0, 2, 1)).max() > tol * escale:
            raise ValueError("piezoelectric tensor breaks e_kij = e_kji")
        if eps is not None:
            if eps.shape != (3, 3):
                raise ValueError(f"eps must be 3x3, got {eps.shape}")
            if np.abs(eps - eps.T).max() > tol * max(np.abs(eps).max(), 1.0):
                raise ValueError("permittivity tensor not symmetric")
            if np.linalg.eigvalsh(0.5 * (eps + eps.T)).min() <= 0:
                raise ValueError("permittivity tensor not positive definite")
        if not self.rho > 0:
            raise ValueError(f"density must be positive, got {self.rho}")

    @property
    def is_piezoelectric(self):
        return self.eps is not None

    @classmethod
    def from_voigt(cls, c_voigt, e_voigt=None, eps=None, rho=1.0):
        """Build from Voigt matrices; ``e_voigt`` defaults to zero coupling."""
        c = voigt_to_elasticity(c_voigt)
        e = voigt_to_piezo(e_voigt) if e_voigt is not None else np.zeros((3, 3, 3))
        return cls(c=c, e=e, eps=None if eps is None else np.asarray(eps, float), rho=rho)

    @classmethod
    def isotropic_elastic(cls, lam, mu, rho):
        """Isotropic elastic material (electrode model): no coupling, no eps."""
        d = np.eye(3)
        c = (
            lam * np.einsum("ij,kl->ijkl", d, d)
            + mu * (np.einsum("ik,jl->ijkl", d, d) + np.einsum("il,jk->ijkl", d, d))
        )
        return cls(c=c, e=np.zeros((3, 3, 3)), eps=None, rho=rho)


def rotation_matrix(euler_angles):
    """Orthogonal matrix for intrinsic z-x-z Euler angles (radians).

    R = Rz(alpha) @ Rx(beta) @ Rz(gamma); vectors transform as v' = R v.
    """
    alpha, beta, gamma = euler_angles

    def rz(t):
        c, s = np.cos(t), np.sin(t)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def rx(t):
        c, s = np.cos(t), np.sin(t)
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])

    return rz(alpha) @ rx(beta) @ rz(gamma)


def rotate_material(m, euler_angles):
    """Rotate all tensors of a MaterialSet by z-x-z Euler angles.

    c'_ijkl = R_ia R_jb R_kc R_ld c_abcd, and the analogous contractions
    for the rank-3 coupling and rank-2 permittivity tensors; density is
    invariant.
    """
    r = rotation_matrix(euler_angles)
    c = np.einsum("ia,jb,kc,ld,abcd->ijkl", r, r, r, r, m.c, optimize=True)
    e = np.einsum("ka,ib,jc,abc->kij", r, r, r, m.e, optimize=True)
    eps = None if m.eps is None else r @ m.eps @ r.T
    return replace(m, c=c, e=e, eps=eps)


def _parse_matrix(lines, rows, cols):
    vals = []
    for line in lines:
        vals.extend(float(tok) for tok in line.replace(",", " ").split())
    if len(vals) != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, got {len(vals)}")
    return np.array(vals).reshape(rows, cols)


def load_material(path):
    """Read a material from a key-value text file.

    Format: ``key: value`` scalars and ``key:`` followed by indented
    matrix rows.  Keys: ``c_voigt`` (6x6, Pa), optional ``e_voigt``
    (3x6, C/m^2), optional ``eps`` (3x3, F/m) or ``eps_relative``
    (3 diagonal entries or 3x3, multiples of vacuum permittivity),
    ``rho`` (kg/m^3), optional ``euler_deg`` (three angles, applied on
    load).  Lines starting with ``#`` are comments.
    """
    blocks = {}
    key = None
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip()
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if not line[0].isspace() and ":" in line:
                key, _, rest = line.partition(":")
                key = key.strip()
                blocks[key] = [rest.strip()] if rest.strip() else []
            elif key is not None:
                blocks[key].append(line.strip())
            else:
                raise ValueError(f"stray line in material file: {line!r}")

    if "c_voigt" not in blocks or "rho" not in blocks:
        raise ValueError(f"{path}: material file needs c_voigt and rho")
    c_voigt = _parse_matrix(blocks["c_voigt"], 6, 6)
    e_voigt = _parse_matrix(blocks["e_voigt"], 3, 6) if "e_voigt" in blocks else None
    eps = None
    if "eps" in blocks:
        eps = _parse_matrix(blocks["eps"], 3, 3)
    elif "eps_relative" in blocks:
        vals = []
        for line in blocks["eps_relative"]:
            vals.extend(float(tok) for tok in line.replace(",", " ").split())
        if len(vals) == 3:
            eps = np.diag(vals) * VACUUM_PERMITTIVITY
        elif len(vals) == 9:
            eps = np.array(vals).reshape(3, 3) * VACUUM_PERMITTIVITY
        else:
            raise ValueError("eps_relative needs 3 or 9 entries")
    rho = float(blocks["rho"][0])

    m = MaterialSet.from_voigt(c_voigt, e_voigt, eps, rho)
    if "euler_deg" in blocks:
        angles = [float(tok) for tok in " ".join(blocks["euler_deg"]).split()]
        if len(angles) != 3:
            raise ValueError("euler_deg needs exactly three angles")
        m = rotate_material(m, np.deg2rad(angles))
    return m
