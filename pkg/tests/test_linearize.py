import numpy as np
import pytest

from freeatoms.errors import PreconditionError
from freeatoms.linearize import (
    LinearPencil,
    LinearizationCertificate,
    corner_shift,
    invertibility_equivalence_check,
    linearize,
    numerical_kernel_dim,
    verify_certificate,
)
from freeatoms.ncpoly import NCPoly, adjoint, eval_matrices, is_selfadjoint, star_square

Z1, Z2 = NCPoly.z1(), NCPoly.z2()
ANTICOMM = Z1 * Z2 + Z2 * Z1


def rherm(rng, n):
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (m + m.conj().T) / 2


def random_selfadjoint_poly(rng, degree=3, nterms=4):
    q = NCPoly.zero()
    for _ in range(nterms):
        d = int(rng.integers(1, degree + 1))
        word = tuple(rng.integers(1, 3, size=d).tolist())
        c = complex(int(rng.integers(-3, 4)), int(rng.integers(-3, 4)))
        q = q + NCPoly.monomial(word, c)
    p = q + adjoint(q)
    if p.degree < 1:
        p = p + Z1
    return p


class TestLinearize:
    def test_anticommutator_block_structure(self):
        L, cert = linearize(ANTICOMM)
        assert L.n == 3
        np.testing.assert_array_equal(L.a0, np.array([[0, 0, 0], [0, 0, 1], [0, 1, 0]]))
        np.testing.assert_array_equal(L.a1, np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]]))
        np.testing.assert_array_equal(L.a2, np.array([[0, 0, 1], [0, 0, 0], [1, 0, 0]]))
        assert list(cert.B) == [Z1, Z2]
        assert [list(row) for row in cert.D] == [
            [NCPoly.zero(), NCPoly.one()],
            [NCPoly.one(), NCPoly.zero()],
        ]
        assert verify_certificate(ANTICOMM, cert)

    def test_degree_one(self):
        p = Z1
        L, cert = linearize(p)
        assert verify_certificate(p, cert)
        # exact symbolic reconstruction of condition (e)
        assert all(b.degree <= 1 for b in cert.B)

    def test_z1_squared_certificate(self):
        p = Z1 * Z1
        L, cert = linearize(p)
        assert verify_certificate(p, cert)

    def test_rejects_non_selfadjoint(self):
        with pytest.raises(PreconditionError):
            linearize(Z1 * Z2)

    def test_rejects_constant(self):
        with pytest.raises(PreconditionError):
            linearize(NCPoly.constant(2.0))

    def test_pencil_matches_certificate_entries(self):
        rng = np.random.default_rng(31)
        p = random_selfadjoint_poly(rng)
        L, cert = linearize(p)
        m = cert.m
        assert L.n == 1 + m
        assert L.entry_poly(0, 0) == NCPoly.zero()
        for j in range(m):
            assert L.entry_poly(0, 1 + j) == cert.B[j]
            assert L.entry_poly(1 + j, 0) == cert.C[j]
        for i in range(m):
            for j in range(m):
                assert L.entry_poly(1 + i, 1 + j) == cert.D[i][j]

    def test_round_trip_property(self):
        rng = np.random.default_rng(32)
        for _ in range(12):
            p = random_selfadjoint_poly(rng)
            L, cert = linearize(p)
            assert verify_certificate(p, cert)
            for name in ("a0", "a1", "a2"):
                mat = getattr(L, name)
                np.testing.assert_array_equal(mat, mat.conj().T)

    def test_star_square_route_for_nonselfadjoint(self):
        p = star_square(Z1 * Z2 - 0.5)
        assert is_selfadjoint(p)
        L, cert = linearize(p)
        assert verify_certificate(p, cert)


class TestVerifyCertificate:
    def test_tampered_dprime_fails(self):
        L, cert = linearize(ANTICOMM)
        bad = LinearizationCertificate(
            B=cert.B,
            C=cert.C,
            D=cert.D,
            Dprime=tuple(tuple(-q for q in row) for row in cert.Dprime),
        )
        assert not verify_certificate(ANTICOMM, bad)

    def test_wrong_polynomial_fails(self):
        _, cert = linearize(ANTICOMM)
        assert not verify_certificate(Z1 * Z1, cert)

    def test_random_construction_verifies(self):
        rng = np.random.default_rng(33)
        for _ in range(10):
            p = random_selfadjoint_poly(rng, degree=3)
            _, cert = linearize(p)
            assert verify_certificate(p, cert)


class TestCornerShift:
    def test_zero_shift_is_identity(self):
        L, _ = linearize(ANTICOMM)
        L0 = corner_shift(L, 0.0)
        np.testing.assert_array_equal(L0.a0, L.a0)

    def test_corner_entry(self):
        L, _ = linearize(ANTICOMM)
        L2 = corner_shift(L, 2.0)
        assert L2.a0[0, 0] == 2.0
        assert L2.a0[1, 2] == 1.0

    def test_additivity(self):
        L, _ = linearize(ANTICOMM)
        twice = corner_shift(corner_shift(L, -1.0), -1.0)
        assert twice.a0[0, 0] == -2.0


class TestInvertibilityEquivalence:
    def test_anticommutator_hundred_trials(self):
        L, _ = linearize(ANTICOMM)
        rep = invertibility_equivalence_check(ANTICOMM, L, trials=100, dim=3, seed=7)
        assert rep.ok
        assert rep.generic_checked == 100
        assert rep.engineered_checked == 100

    def test_zero_matrices_both_singular(self):
        L, _ = linearize(ANTICOMM)
        A = np.zeros((2, 2))
        assert numerical_kernel_dim(eval_matrices(ANTICOMM, A, A)) > 0
        assert numerical_kernel_dim(L.evaluate(A, A)) > 0

    def test_z1_diag_singular(self):
        L, _ = linearize(Z1)
        A1 = np.diag([0.0, 1.0])
        A2 = np.zeros((2, 2))
        assert numerical_kernel_dim(eval_matrices(Z1, A1, A2)) == 1
        assert numerical_kernel_dim(L.evaluate(A1, A2)) == 1


class TestKernelTraceIdentity:
    @pytest.mark.parametrize("poly", [ANTICOMM, Z1 * Z1, Z1 * Z2 * Z1], ids=["anticomm", "sq", "pal3"])
    def test_exact_rank_match(self, poly):
        rng = np.random.default_rng(34)
        L, _ = linearize(poly)
        for dim in range(2, 7):
            A1, A2 = rherm(rng, dim), rherm(rng, dim)
            P = eval_matrices(poly, A1, A2)
            lams = list(np.linalg.eigvalsh(P)[:2]) + [0.37]
            for lam in lams:
                shifted = corner_shift(L, float(lam)).evaluate(A1, A2)
                assert numerical_kernel_dim(shifted) == numerical_kernel_dim(
                    lam * np.eye(dim) - P
                )


class TestPencilSerialization:
    def test_round_trip(self):
        L, _ = linearize(ANTICOMM + 0.5 * Z1 - 1.0)
        again = LinearPencil.from_json_dict(L.to_json_dict())
        np.testing.assert_array_equal(again.a0, L.a0)
        np.testing.assert_array_equal(again.a1, L.a1)
        np.testing.assert_array_equal(again.a2, L.a2)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            LinearPencil(np.array([[0, 1], [0, 0]]), np.zeros((2, 2)), np.zeros((2, 2)))
