"""Selfadjoint linearizations of selfadjoint NC polynomials.

A polynomial p with p* = p and degree >= 1 is rewritten as the Schur
complement of a Hermitian linear pencil

    L = a0 (x) 1 + a1 (x) Z1 + a2 (x) Z2 = [[0, B], [C, D]],

where B is a 1 x m row, C = B* is an m x 1 column, D = D* is m x m, all
with entries of degree <= 1, and a polynomial inverse D' of D exists
with B D' C = p.  Both defining identities are exact coefficient
identities, verified symbolically by :func:`verify_certificate`.

Construction: each adjoint-pair of monomials {w, w*} of degree d >= 2
contributes a 2(d-1) block coupling a bidiagonal unit chain for w with
its adjoint chain; palindromic monomials are split as (c/2) w + (c/2) w*
(exact in binary floating point); the affine part occupies one final
2 x 2 block.  For the anticommutator Z1 Z2 + Z2 Z1 this reproduces the
classical 3 x 3 pencil with B = [Z1, Z2] and D = [[0, 1], [1, 0]].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .ncpoly import NCPoly, adjoint, eval_matrices, format_poly, is_selfadjoint

_HERM_TOL = 1e-12

# Minimum singular value below SINGULAR_RTOL * ||matrix|| counts as singular
# in the numerical invertibility equivalence checks.
SINGULAR_RTOL = 1e-8


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearPencil:
    """Hermitian coefficient triple (a0, a1, a2) of size n."""

    a0: np.ndarray
    a1: np.ndarray
    a2: np.ndarray

    def __post_init__(self):
        mats = []
        for name in ("a0", "a1", "a2"):
            m = np.atleast_2d(np.asarray(getattr(self, name), dtype=complex))
            if m.shape[0] != m.shape[1]:
                raise ValueError(f"{name} must be square, got {m.shape}")
            if np.max(np.abs(m - m.conj().T)) > _HERM_TOL * max(1.0, np.max(np.abs(m))):
                raise ValueError(f"{name} must be Hermitian")
            mats.append(m)
        if not (mats[0].shape == mats[1].shape == mats[2].shape):
            raise ValueError("coefficient matrices must share one dimension")
        for name, m in zip(("a0", "a1", "a2"), mats):
            object.__setattr__(self, name, m)

    @property
    def n(self):
        return self.a0.shape[0]

    def evaluate(self, A1, A2):
        """Dense value a0 (x) I + a1 (x) A1 + a2 (x) A2."""
        A1 = np.asarray(A1, dtype=complex)
        A2 = np.asarray(A2, dtype=complex)
        d = A1.shape[0]
        return (
            np.kron(self.a0, np.eye(d))
            + np.kron(self.a1, A1)
            + np.kron(self.a2, A2)
        )

    def entry_poly(self, i, j):
        return NCPoly(
            [((), self.a0[i, j]), ((1,), self.a1[i, j]), ((2,), self.a2[i, j])]
        )

    def to_json_dict(self):
        def pack(m):
            return [[float(v.real), float(v.imag)] for v in m.reshape(-1)]

        return {"n": self.n, "a0": pack(self.a0), "a1": pack(self.a1), "a2": pack(self.a2)}

    @classmethod
    def from_json_dict(cls, d):
        n = int(d["n"])

        def unpack(flat):
            vals = np.array([complex(re, im) for re, im in flat])
            return vals.reshape(n, n)

        return cls(unpack(d["a0"]), unpack(d["a1"]), unpack(d["a2"]))


@dataclass(frozen=True)
class LinearizationCertificate:
    """Symbolic witness (B, C, D, D') for a pencil linearizing p."""

    B: tuple  # 1 x m of NCPoly
    C: tuple  # m x 1 of NCPoly
    D: tuple  # m x m rows of tuples of NCPoly
    Dprime: tuple

    @property
    def m(self):
        return len(self.B)

    def to_json_dict(self):
        return {
            "B": [format_poly(p) for p in self.B],
            "C": [format_poly(p) for p in self.C],
            "D": [[format_poly(p) for p in row] for row in self.D],
            "Dprime": [[format_poly(p) for p in row] for row in self.Dprime],
        }


# ---------------------------------------------------------------------------
# polynomial matrix helpers
# ---------------------------------------------------------------------------


def _poly_matmul(A, B):
    rows, inner, cols = len(A), len(B), len(B[0])
    out = []
    for i in range(rows):
        row = []
        for j in range(cols):
            acc = NCPoly.zero()
            for k in range(inner):
                acc = acc + A[i][k] * B[k][j]
            row.append(acc)
        out.append(row)
    return out


def _poly_eye(m):
    return [[NCPoly.one() if i == j else NCPoly.zero() for j in range(m)] for i in range(m)]


def _is_poly_identity(M):
    m = len(M)
    for i in range(m):
        for j in range(m):
            want = NCPoly.one() if i == j else NCPoly.zero()
            if M[i][j] != want:
                return False
    return True


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def _chain_block(word, coeff):
    """One-sided chain for coeff * word of degree d >= 2.

    Returns (B_row, C_col, D, Dinv) of size m = d - 1 with
    B D^{-1} C = coeff * word, D unitriangular so D^{-1} is polynomial.
    """
    d = len(word)
    m = d - 1
    B = [NCPoly.zero()] * m
    B[0] = NCPoly.monomial((word[0],), coeff)
    C = [NCPoly.zero()] * m
    C[m - 1] = NCPoly.letter(word[d - 1])
    D = _poly_eye(m)
    for i in range(m - 1):
        D[i][i + 1] = -NCPoly.letter(word[i + 1])
    Dinv = _poly_eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            Dinv[i][j] = NCPoly.monomial(tuple(word[i + 1 : j + 1]), 1.0)
    return B, C, D, Dinv


def _adjoint_poly_matrix(M):
    rows, cols = len(M), len(M[0])
    return [[adjoint(M[i][j]) for i in range(rows)] for j in range(cols)]


def _pair_block(word, coeff):
    """Symmetric block contributing coeff*word + conj(coeff)*word*.

    Couples the chain for ``word`` with its adjoint chain through an
    antidiagonal D; for degree 2 this is B = [c Z_i, Z_j] with
    D = [[0, 1], [1, 0]].
    """
    Bw, Cw, Dw, Dwinv = _chain_block(word, coeff)
    mw = len(Bw)
    Dw_star = _adjoint_poly_matrix(Dw)
    Dwinv_star = _adjoint_poly_matrix(Dwinv)
    zero = [[NCPoly.zero()] * mw for _ in range(mw)]
    B = Bw + [adjoint(c) for c in Cw]
    D = [row_a + row_b for row_a, row_b in zip(zero, Dw_star)] + [
        row_a + row_b for row_a, row_b in zip(Dw, zero)
    ]
    Dprime = [row_a + row_b for row_a, row_b in zip(zero, Dwinv)] + [
        row_a + row_b for row_a, row_b in zip(Dwinv_star, zero)
    ]
    return B, D, Dprime


def _affine_block(p_aff):
    """2-slot block realizing a selfadjoint affine part."""
    half = p_aff * 0.5
    B = [half, NCPoly.one()]
    D = [[NCPoly.zero(), NCPoly.one()], [NCPoly.one(), NCPoly.zero()]]
    return B, D, D


def linearize(p: NCPoly):
    """Build a selfadjoint linearization of a selfadjoint polynomial.

    Returns ``(pencil, certificate)``; raises
    :class:`~freeatoms.errors.PreconditionError` for non-selfadjoint or
    constant input.  The certificate identities hold exactly.
    """
    if not is_selfadjoint(p):
        raise PreconditionError("linearize requires a selfadjoint polynomial")
    if p.degree < 1:
        raise PreconditionError("linearize requires degree >= 1")

    blocks = []
    seen = set()
    for word, coeff in p.higher_part().terms:
        if word in seen:
            continue
        rev = word[::-1]
        if rev == word:
            blocks.append(_pair_block(word, coeff / 2.0))
            seen.add(word)
        else:
            # selfadjointness pairs word with its reversal, conjugated
            blocks.append(_pair_block(word, coeff))
            seen.add(word)
            seen.add(rev)
    p_aff = p.affine_part()
    if not p_aff.is_zero:
        blocks.append(_affine_block(p_aff))

    B = []
    for Bb, _, _ in blocks:
        B.extend(Bb)
    m = len(B)
    D = [[NCPoly.zero()] * m for _ in range(m)]
    Dprime = [[NCPoly.zero()] * m for _ in range(m)]
    off = 0
    for Bb, Db, Dpb in blocks:
        k = len(Bb)
        for i in range(k):
            for j in range(k):
                D[off + i][off + j] = Db[i][j]
                Dprime[off + i][off + j] = Dpb[i][j]
        off += k
    C = [adjoint(q) for q in B]
    cert = LinearizationCertificate(B=tuple(B), C=tuple(C), D=tuple(tuple(r) for r in D),
                                    Dprime=tuple(tuple(r) for r in Dprime))

    n = 1 + m
    a0 = np.zeros((n, n), dtype=complex)
    a1 = np.zeros((n, n), dtype=complex)
    a2 = np.zeros((n, n), dtype=complex)

    def put(i, j, poly):
        if poly.degree > 1:
            raise AssertionError("pencil entries must have degree <= 1")
        a0[i, j] = poly.coeff(())
        a1[i, j] = poly.coeff((1,))
        a2[i, j] = poly.coeff((2,))

    for j, poly in enumerate(B):
        put(0, 1 + j, poly)
    for i, poly in enumerate(C):
        put(1 + i, 0, poly)
    for i in range(m):
        for j in range(m):
            put(1 + i, 1 + j, D[i][j])
    return LinearPencil(a0, a1, a2), cert


def verify_certificate(p: NCPoly, cert: LinearizationCertificate) -> bool:
    """Check C = B*, D = D*, D D' = D' D = 1 and B D' C = p, all exactly."""
    m = cert.m
    if any(cert.C[i] != adjoint(cert.B[i]) for i in range(m)):
        return False
    for i in range(m):
        for j in range(m):
            if cert.D[i][j] != adjoint(cert.D[j][i]):
                return False
    D = [list(r) for r in cert.D]
    Dp = [list(r) for r in cert.Dprime]
    if not _is_poly_identity(_poly_matmul(D, Dp)):
        return False
    if not _is_poly_identity(_poly_matmul(Dp, D)):
        return False
    BDp = _poly_matmul([list(cert.B)], Dp)
    prod = _poly_matmul(BDp, [[c] for c in cert.C])
    return prod[0][0] == p


def corner_shift(L: LinearPencil, lam: float) -> LinearPencil:
    """Add lam to the (1,1) corner of the constant coefficient.

    The shifted pencil tests the location lam: the kernel of
    lam e11 (x) 1 + L(X1, X2) matches the kernel of lam - p(X1, X2).
    """
    a0 = L.a0.copy()
    a0[0, 0] += lam
    return LinearPencil(a0, L.a1, L.a2)


# ---------------------------------------------------------------------------
# numerical invertibility equivalence
# ---------------------------------------------------------------------------


def numerical_kernel_dim(m):
    """Kernel dimension with the scale-invariant threshold SINGULAR_RTOL * ||m||."""
    s = np.linalg.svd(np.atleast_2d(m), compute_uv=False)
    if s.size == 0:
        return 0
    return int(np.sum(s < SINGULAR_RTOL * max(s[0], 1.0)))


def _is_singular(m):
    return numerical_kernel_dim(m) > 0


@dataclass
class EquivalenceReport:
    trials: int
    generic_checked: int = 0
    engineered_checked: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations


def invertibility_equivalence_check(p: NCPoly, L: LinearPencil, trials: int = 50,
                                    dim: int = 3, seed: int = 0) -> EquivalenceReport:
    """Monte Carlo check that p(A1, A2) and L(A1, A2) are singular together.

    Generic Hermitian samples should leave both invertible; samples
    engineered to make (lam - p)(A1, A2) singular must leave the
    corner-shifted pencil singular too, with equal kernel dimensions.
    """
    rng = np.random.default_rng(seed)
    report = EquivalenceReport(trials=trials)
    selfadj = is_selfadjoint(p)
    for trial in range(trials):
        A1 = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        A2 = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        A1 = (A1 + A1.conj().T) / 2
        A2 = (A2 + A2.conj().T) / 2
        P = eval_matrices(p, A1, A2)
        Lval = L.evaluate(A1, A2)
        sing_p = _is_singular(P)
        sing_l = _is_singular(Lval)
        report.generic_checked += 1
        if sing_p != sing_l:
            report.violations.append(
                {"trial": trial, "kind": "generic", "p_singular": sing_p, "L_singular": sing_l}
            )
        if selfadj:
            lam = float(np.sort(np.linalg.eigvalsh(P))[trial % dim])
            shifted = corner_shift(L, lam).evaluate(A1, A2)
            ker_p = numerical_kernel_dim(lam * np.eye(dim) - P)
            ker_l = numerical_kernel_dim(shifted)
            report.engineered_checked += 1
            if not _is_singular(lam * np.eye(dim) - P) or not _is_singular(shifted) or ker_p != ker_l:
                report.violations.append(
                    {
                        "trial": trial,
                        "kind": "engineered",
                        "lam": lam,
                        "ker_p": int(ker_p),
                        "ker_L": int(ker_l),
                    }
                )
    return report
