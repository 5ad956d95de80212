import numpy as np
import pytest

from sawfeti.config import data_path
from sawfeti.materials import (
    MaterialSet,
    elasticity_to_voigt,
    load_material,
    rotate_material,
    rotation_matrix,
    voigt_to_elasticity,
    voigt_to_piezo,
)

from conftest import synthetic_substrate


def brute_force_rotate_c(c, r):
    """Index-by-index rank-4 transform, independent of einsum."""
    out = np.zeros((3, 3, 3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    acc = 0.0
                    for a in range(3):
                        for b in range(3):
                            for cc in range(3):
                                for d in range(3):
                                    acc += r[i, a] * r[j, b] * r[k, cc] * r[l, d] * c[a, b, cc, d]
                    out[i, j, k, l] = acc
    return out


def test_voigt_round_trip():
    rng = np.random.default_rng(0)
    sym = rng.standard_normal((6, 6))
    sym = 0.5 * (sym + sym.T)
    assert np.allclose(elasticity_to_voigt(voigt_to_elasticity(sym)), sym)


def test_voigt_piezo_symmetry():
    ev = np.arange(18, dtype=float).reshape(3, 6)
    e = voigt_to_piezo(ev)
    assert np.allclose(e, e.transpose(0, 2, 1))


def test_material_invariants_enforced():
    bad_c = np.zeros((3, 3, 3, 3))
    bad_c[0, 1, 2, 2] = 1.0  # breaks c_ijkl = c_jikl
    with pytest.raises(ValueError, match="symmetry"):
        MaterialSet(c=bad_c, e=np.zeros((3, 3, 3)), eps=np.eye(3), rho=1.0)
    with pytest.raises(ValueError, match="positive definite"):
        MaterialSet(
            c=MaterialSet.isotropic_elastic(1.0, 1.0, 1.0).c,
            e=np.zeros((3, 3, 3)), eps=-np.eye(3), rho=1.0,
        )
    with pytest.raises(ValueError, match="density"):
        MaterialSet.isotropic_elastic(1.0, 1.0, rho=0.0)


class TestRotation:
    def test_zero_rotation_is_identity(self):
        m = synthetic_substrate()
        r = rotate_material(m, (0.0, 0.0, 0.0))
        assert np.array_equal(r.c, m.c)
        assert np.array_equal(r.e, m.e)
        assert np.allclose(r.eps, m.eps)

    @pytest.mark.parametrize("axis_angles", [
        (2 * np.pi, 0.0, 0.0), (0.0, 2 * np.pi, 0.0), (0.0, 0.0, 2 * np.pi),
    ])
    def test_full_turn(self, axis_angles):
        m = synthetic_substrate()
        r = rotate_material(m, axis_angles)
        assert np.abs(r.c - m.c).max() <= 1e-12 * np.abs(m.c).max()
        assert np.abs(r.e - m.e).max() <= 1e-12 * max(np.abs(m.e).max(), 1.0)

    def test_quarter_turn_marker(self):
        # 90 deg about x3 maps the 1111 stiffness marker onto 2222
        c = np.zeros((3, 3, 3, 3))
        c[0, 0, 0, 0] = 7.0
        m = MaterialSet(c=c, e=np.zeros((3, 3, 3)), eps=np.eye(3), rho=1.0)
        r = rotate_material(m, (np.pi / 2, 0.0, 0.0))
        assert r.c[1, 1, 1, 1] == pytest.approx(7.0, abs=1e-12)
        assert r.c[0, 0, 0, 0] == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_against_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        m = synthetic_substrate()
        angles = rng.uniform(0, 2 * np.pi, size=3)
        r = rotate_material(m, angles)
        ref = brute_force_rotate_c(m.c, rotation_matrix(angles))
        assert np.abs(r.c - ref).max() <= 1e-12 * np.abs(m.c).max()

    @pytest.mark.parametrize("seed", range(3))
    def test_preserves_symmetries(self, seed):
        rng = np.random.default_rng(100 + seed)
        m = synthetic_substrate()
        r = rotate_material(m, rng.uniform(0, 2 * np.pi, size=3))
        r.validate(tol=1e-12)
        # permittivity spectrum is rotation invariant
        assert np.allclose(
            np.linalg.eigvalsh(r.eps), np.linalg.eigvalsh(m.eps), atol=1e-12
        )


class TestMaterialFile:
    def test_load_round_trip(self, tmp_path):
        path = tmp_path / "mat.txt"
        path.write_text(
            "# test material\n"
            "c_voigt:\n"
            + "\n".join("    " + " ".join(
                str(2.0 if i == j else 0.5) for j in range(6)) for i in range(6))
            + "\ne_voigt:\n"
            + "\n".join("    " + " ".join("0.1" for _ in range(6)) for _ in range(3))
            + "\neps_relative: 2.0 2.0 3.0\n"
            "rho: 1250.0\n"
        )
        m = load_material(path)
        assert m.rho == 1250.0
        assert m.is_piezoelectric
        assert m.eps[2, 2] == pytest.approx(3.0 * 8.8541878128e-12)

    def test_euler_applied_on_load(self, tmp_path):
        base = tmp_path / "base.txt"
        rot = tmp_path / "rot.txt"
        c_rows = "\n".join("    " + " ".join(
            str(3.0 if i == j else 1.0) for j in range(6)) for i in range(6))
        base.write_text(f"c_voigt:\n{c_rows}\nrho: 1.0\n")
        rot.write_text(f"c_voigt:\n{c_rows}\nrho: 1.0\neuler_deg: 10 20 30\n")
        m0 = load_material(base)
        m1 = load_material(rot)
        ref = rotate_material(m0, np.deg2rad([10, 20, 30]))
        assert np.allclose(m1.c, ref.c)

    def test_missing_keys_rejected(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("rho: 1.0\n")
        with pytest.raises(ValueError, match="c_voigt"):
            load_material(p)

    def test_builtin_files_load(self):
        sub = load_material(data_path("linbo3_yx128.txt"))
        assert sub.is_piezoelectric and sub.rho == 4700.0
        sub.validate(tol=1e-8)
        al = load_material(data_path("aluminum.txt"))
        assert not al.is_piezoelectric and al.rho == 2700.0
