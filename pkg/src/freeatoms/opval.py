"""Matrix-valued Cauchy transforms of a (x) X and pencil kernel dimensions.

For a Hermitian n x n coefficient ``a`` and a scalar-distributed variable
X with law mu, the transform is G(z) = int (z - t a)^{-1} dmu(t) for z in
the matrix upper half-plane.  The second half of the module computes the
normalized kernel dimension k(t) of the pencil b - t a, its generic
minimum, the finite exceptional set, and the kernel trace

    tau_n(ker(b (x) 1 - a (x) X)) = k_min + sum_t (k(t) - k_min) mu({t}),

where the sum runs over the atoms of mu.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, HalfPlaneError
from .measure import SpectralMeasure, integrate_piece

# Singular values below RANK_RTOL * max(sigma_1, 1) count as zero.
RANK_RTOL = 1e-8


# ---------------------------------------------------------------------------
# half-plane utilities
# ---------------------------------------------------------------------------


def imag_part(z):
    """Matrix imaginary part (z - z*) / 2i."""
    z = np.asarray(z, dtype=complex)
    return (z - z.conj().T) / 2j


def herm_part(z):
    z = np.asarray(z, dtype=complex)
    return (z + z.conj().T) / 2


def min_imag_eig(z):
    return float(np.linalg.eigvalsh(imag_part(z)).min())


def in_upper_half(z, tol=0.0):
    return min_imag_eig(z) > tol


def validate_upper(z, where="argument"):
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    if z.shape[0] != z.shape[1]:
        raise HalfPlaneError(f"{where} must be square, got shape {z.shape}")
    if not in_upper_half(z):
        raise HalfPlaneError(
            f"{where} must have positive definite imaginary part "
            f"(min eigenvalue {min_imag_eig(z):.3e})"
        )
    return z


def _as_herm(a, name="coefficient"):
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got {a.shape}")
    if np.max(np.abs(a - a.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(a))):
        raise ValueError(f"{name} must be Hermitian")
    return herm_part(a)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def matrix_cauchy(a, mu: SpectralMeasure, z) -> np.ndarray:
    """G(z) = int (z - t a)^{-1} dmu(t); maps H+_n into H-_n."""
    a = _as_herm(a)
    z = validate_upper(z, "z")
    n = z.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"coefficient shape {a.shape} does not match point shape {z.shape}")

    def resolvent(ts):
        ts = np.asarray(ts, dtype=float)
        mats = z[None, :, :] - ts[:, None, None] * a[None, :, :]
        return np.linalg.inv(mats)

    return np.asarray(mu.integrate(resolvent), dtype=complex)


def matrix_f(a, mu: SpectralMeasure, z) -> np.ndarray:
    """Reciprocal transform F(z) = G(z)^{-1}; self-map of H+_n with Im F >= Im z."""
    return np.linalg.inv(matrix_cauchy(a, mu, z))


# ---------------------------------------------------------------------------
# pencil kernels
# ---------------------------------------------------------------------------


def _rank(m):
    m = np.atleast_2d(m)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0:
        return 0
    return int(np.sum(s > RANK_RTOL * max(s[0], 1.0)))


def kernel_basis(m):
    """Orthonormal basis of the numerical kernel (columns), via SVD."""
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    _u, s, vh = np.linalg.svd(m)
    thresh = RANK_RTOL * max(s[0] if s.size else 0.0, 1.0)
    r = int(np.sum(s > thresh))
    return vh[r:, :].conj().T


def pencil_kernel_rank(a, b, t: float) -> Fraction:
    """k(t) = dim ker(b - t a) / n as an exact rational."""
    a = _as_herm(a, "a")
    b = _as_herm(b, "b")
    n = a.shape[0]
    return Fraction(n - _rank(b - t * a), n)


@dataclass(frozen=True)
class PencilKernelProfile:
    """Generic kernel dimension of t -> ker(b - t a) and its exceptional points."""

    k_min: Fraction
    exceptional: tuple  # ((t, k_t), ...) with k_t > k_min
    n: int

    def k_at(self, t, tol=1e-9):
        for loc, k in self.exceptional:
            if abs(loc - t) <= tol:
                return k
        return self.k_min


def _real_finite_eigs(b, a):
    """Finite real generalized eigenvalues of (b, a): t with det(b - t a) = 0."""
    try:
        vals = scipy.linalg.eig(b, a, right=False)
    except (np.linalg.LinAlgError, ValueError):
        return []
    out = []
    for v in vals:
        if not np.isfinite(v):
            continue
        if abs(v.imag) <= 1e-8 * (1.0 + abs(v.real)):
            out.append(float(v.real))
    return out


def _candidate_points(a, b, rng, generic_rank):
    """Conservative candidate exceptional points.

    Regular pencils: QZ generalized eigenvalues of (b, a).  Singular
    pencils (identically rank-deficient): compress twice with randomized
    row/column bases taken at random shifts, collect eigenvalues of the
    regular subpencils; k(t) is then re-verified on the full pencil.
    """
    n = a.shape[0]
    if generic_rank == n:
        return _real_finite_eigs(b, a)
    if generic_rank == 0:
        return []
    cands = []
    scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    for _ in range(2):
        s = float(rng.uniform(2.0, 4.0) * scale * (1 if rng.uniform() < 0.5 else -1))
        m = b - s * a
        u, sv, vh = np.linalg.svd(m)
        r = generic_rank
        q = u[:, :r]
        w = vh[:r, :].conj().T
        cands.extend(_real_finite_eigs(q.conj().T @ b @ w, q.conj().T @ a @ w))
    return cands


def kernel_profile(a, b, hints=(), rng=None) -> PencilKernelProfile:
    """Find k_min by randomized consensus and the exceptional points above it."""
    a = _as_herm(a, "a")
    b = _as_herm(b, "b")
    n = a.shape[0]
    rng = np.random.default_rng(0x5EED) if rng is None else rng
    scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))),
                *[abs(float(h)) for h in hints])

    # generic rank by consensus over 7 draws outside the working scale,
    # widening the draw interval on disagreement
    width = 1.0
    ranks = None
    for _attempt in range(6):
        draws = []
        while len(draws) < 7:
            t = float(rng.uniform(scale + 1.0, (3.0 + width) * scale + 2.0))
            t *= 1 if rng.uniform() < 0.5 else -1
            draws.append(t)
        ranks = [_rank(b - t * a) for t in draws]
        if len(set(ranks)) == 1:
            break
        width *= 4.0
    else:
        raise ConvergenceError(
            "no generic-rank consensus after widening the sample interval",
            {"ranks": ranks},
        )
    generic_rank = ranks[0]
    k_min = Fraction(n - generic_rank, n)

    cands = [float(h) for h in hints]
    cands.extend(_candidate_points(a, b, rng, generic_rank))
    # merge candidates that agree to roundoff; hints come first so the
    # exact atom locations win over QZ roundoff neighbours
    merged = []
    for t in cands:
        if all(abs(t - s) > 1e-9 * (1.0 + abs(t)) for s in merged):
            merged.append(t)
    exceptional = []
    for t in sorted(merged):
        k_t = pencil_kernel_rank(a, b, t)
        if k_t > k_min:
            exceptional.append((t, k_t))
    return PencilKernelProfile(k_min=k_min, exceptional=tuple(exceptional), n=n)


def pencil_kernel_trace(a, b, mu: SpectralMeasure, rng=None) -> float:
    """tau_n of the kernel projection of b (x) 1 - a (x) X for X ~ mu."""
    profile = kernel_profile(a, b, hints=[x for x, _ in mu.atoms], rng=rng)
    total = float(profile.k_min)
    for t, k_t in profile.exceptional:
        total += float(k_t - profile.k_min) * mu.atom_mass_at(t, tol=1e-9)
    return total


def expected_kernel_projection(a, b, mu: SpectralMeasure, transform=None, rng=None):
    """Expected kernel projection of (b - t a) under mu, optionally transformed.

    Returns int P(t) dmu(t) where P(t) projects onto T ker(b - t a) for
    the optional invertible matrix T (identity when omitted).  Used to
    evaluate kernel expectations of single-variable pencils directly from
    the spectral model, independently of any boundary-limit estimate.
    """
    a = _as_herm(a, "a")
    b = _as_herm(b, "b")
    n = a.shape[0]
    T = np.eye(n) if transform is None else np.asarray(transform, dtype=complex)
    profile = kernel_profile(a, b, hints=[x for x, _ in mu.atoms], rng=rng)

    def proj_at(t):
        null = kernel_basis(b - t * a)
        if null.shape[1] == 0:
            return np.zeros((n, n), dtype=complex)
        cols = T @ null
        q, _ = np.linalg.qr(cols)
        return q @ q.conj().T

    total = np.zeros((n, n), dtype=complex)
    for loc, m in mu.atoms:
        total += m * proj_at(loc)
    if profile.k_min > 0 and mu.continuous:
        def proj_batch(ts):
            return np.stack([proj_at(float(t)) for t in np.asarray(ts)])

        for piece in mu.continuous:
            total += piece.weight * integrate_piece(proj_batch, piece, rtol=1e-10)
    return herm_part(total)
