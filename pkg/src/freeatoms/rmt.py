"""Monte Carlo oracle: Haar-conjugated matrix models of free pairs.

Independent of the transform pipeline: a pair (A1, A2) with prescribed
spectra and Haar-random relative position is asymptotically free, so
eigenvalue statistics of polynomials or pencils in (A1, A2) estimate
the corresponding spectral quantities with O(1/N) bias.  Spectra are
deterministic quantile grids, which removes marginal sampling noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .measure import SpectralMeasure, quantiles
from .ncpoly import NCPoly, is_selfadjoint
from .subord import FreeSumModel


@dataclass(frozen=True)
class EnsembleSpec:
    N: int
    trials: int
    seed: int
    mu1: SpectralMeasure
    mu2: SpectralMeasure

    def __post_init__(self):
        if self.N < 2:
            raise PreconditionError("matrix size N must be >= 2")
        if self.trials < 1:
            raise PreconditionError("trials must be >= 1")

    def trial_rngs(self):
        seq = np.random.SeedSequence(self.seed)
        return [np.random.default_rng(s) for s in seq.spawn(self.trials)]


def haar_unitary(N, rng):
    """Haar-distributed unitary via QR of a complex Ginibre matrix."""
    g = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(rng, n, scale=1.0):
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (m + m.conj().T) / 2


def realize_pair(spec: EnsembleSpec, rng=None):
    """One draw (A1, A2) = (U1 D1 U1*, U2 D2 U2*) with quantile spectra."""
    rng = spec.trial_rngs()[0] if rng is None else rng
    out = []
    for mu in (spec.mu1, spec.mu2):
        d = quantiles(mu, spec.N)
        u = haar_unitary(spec.N, rng)
        a = (u * d) @ u.conj().T
        out.append((a + a.conj().T) / 2)
    return out[0], out[1]


def _realize_reduced(spec, rng):
    """Pair (D1, U D2 U*) with one Haar unitary: equal in joint law to
    :func:`realize_pair` conjugated by U1*, so every polynomial or pencil
    spectrum is distributed identically while saving one QR and keeping
    the first matrix diagonal."""
    d1 = quantiles(spec.mu1, spec.N)
    d2 = quantiles(spec.mu2, spec.N)
    u = haar_unitary(spec.N, rng)
    a2 = (u * d2) @ u.conj().T
    a2 = (a2 + a2.conj().T) / 2
    return d1, a2


def empirical_kernel_mass(matrix, lam, epsilon):
    """Fraction of eigenvalues of a Hermitian matrix within [lam-eps, lam+eps]."""
    if epsilon <= 0:
        raise PreconditionError("epsilon must be positive")
    eigs = np.linalg.eigvalsh(np.asarray(matrix))
    return kernel_mass_from_eigs(eigs, lam, epsilon)


def kernel_mass_from_eigs(eigs, lam, epsilon):
    eigs = np.asarray(eigs, dtype=float)
    return float(np.count_nonzero(np.abs(eigs - lam) <= epsilon)) / eigs.size


def _pencil_eigs(spec, model, b, rng):
    """Eigenvalues of one pencil draw.

    With ``b`` given this is b (x) 1 - a1 (x) A1 - a2 (x) A2 (kernel
    mass lives at 0); with ``b = None`` it is the sum a1 (x) A1 +
    a2 (x) A2 itself, whose spectral axis carries the atoms directly.
    When only one coefficient acts (a2 = 0 or mu2 a point mass), the
    relative unitary drops out and the spectrum splits exactly into
    quantile blocks, which avoids the dense eigensolve.
    """
    n = model.n
    N = spec.N
    sign = -1.0 if b is None else 1.0  # b=None: report +sum instead of b-sum
    b_mat = np.zeros((n, n), dtype=complex) if b is None else np.asarray(b, dtype=complex)
    single = None
    if np.allclose(model.a2, 0.0):
        single = (model.a1, spec.mu1, b_mat)
    elif np.allclose(model.a1, 0.0):
        single = (model.a2, spec.mu2, b_mat)
    elif len(spec.mu2.atoms) == 1 and not spec.mu2.continuous:
        c = spec.mu2.atoms[0][0]
        single = (model.a1, spec.mu1, b_mat - c * model.a2)
    elif len(spec.mu1.atoms) == 1 and not spec.mu1.continuous:
        c = spec.mu1.atoms[0][0]
        single = (model.a2, spec.mu2, b_mat - c * model.a1)
    if single is not None:
        a, mu, b_eff = single
        ts = quantiles(mu, N)
        blocks = b_eff[None, :, :] - ts[:, None, None] * a[None, :, :]
        return np.sort(sign * np.linalg.eigvalsh(blocks).reshape(-1))
    d1, A2 = _realize_reduced(spec, rng)
    big = (
        np.kron(b_mat, np.eye(N))
        - np.kron(model.a1, np.diag(d1).astype(complex))
        - np.kron(model.a2, A2)
    )
    return np.sort(sign * np.linalg.eigvalsh(big))


def _eval_poly_diag_first(poly, d1, A2):
    """p(D1, A2) with D1 diagonal.

    Multiplications by D1 are row/column scalings; the accumulator stays
    diagonal until the first occurrence of the second letter, so short
    words cost O(N^2) instead of a dense product.
    """
    N = A2.shape[0]
    out = np.zeros((N, N), dtype=complex)
    for word, coeff in poly.terms:
        diag_acc = np.ones(N, dtype=complex)
        acc = None  # dense part, None while still diagonal
        for letter in word:
            if letter == 1:
                if acc is None:
                    diag_acc = diag_acc * d1
                else:
                    acc = acc * d1[None, :]
            else:
                if acc is None:
                    acc = diag_acc[:, None] * A2
                else:
                    acc = acc @ A2
        if acc is None:
            out[np.diag_indices(N)] += coeff * diag_acc
        else:
            out += coeff * acc
    return out


def _poly_eigs(spec, poly, rng):
    d1, A2 = _realize_reduced(spec, rng)
    val = _eval_poly_diag_first(poly, d1, A2)
    return np.linalg.eigvalsh((val + val.conj().T) / 2)


@dataclass
class OracleReport:
    """Deterministic (seeded) spectral report: histogram, spikes, masses."""

    bin_edges: np.ndarray
    counts_mean: np.ndarray  # averaged over trials
    counts_std: np.ndarray
    spikes: list  # bin centers whose count exceeds 3x both neighbours
    masses: dict  # location -> (estimate, standard_error)
    N: int
    trials: int
    seed: int
    epsilon: float

    def density_estimate(self):
        widths = np.diff(self.bin_edges)
        total = self.counts_mean.sum()
        return self.counts_mean / (total * widths)

    def to_json_dict(self):
        return {
            "bin_edges": [float(x) for x in self.bin_edges],
            "counts_mean": [float(x) for x in self.counts_mean],
            "counts_std": [float(x) for x in self.counts_std],
            "spikes": [float(x) for x in self.spikes],
            "masses": {str(k): [float(v[0]), float(v[1])] for k, v in self.masses.items()},
            "N": self.N,
            "trials": self.trials,
            "seed": self.seed,
            "epsilon": self.epsilon,
        }


def _find_spikes(counts, edges):
    spikes = []
    for i, c in enumerate(counts):
        left = counts[i - 1] if i > 0 else 0.0
        right = counts[i + 1] if i + 1 < len(counts) else 0.0
        if c >= 5 and c > 3.0 * max(left, right, 1.0):
            spikes.append(0.5 * (edges[i] + edges[i + 1]))
    return spikes


def oracle_report(spec: EnsembleSpec, poly: NCPoly | None = None, lam: float = 0.0,
                  model: FreeSumModel | None = None, b=None, locations=None,
                  bins: int = 201, epsilon: float | None = None,
                  workers: int = 1) -> OracleReport:
    """Monte Carlo spectral report for a polynomial or a pencil target.

    Exactly one of ``poly`` or ``model`` must be given.  For a model the
    optional ``b`` selects the kernel test of b (x) 1 - sum (masses at
    0); without it the sum's own spectrum is reported and ``locations``
    are read on that axis.  The report is bit-identical for identical
    seeds: per-trial generators are spawned from the seed and results
    reduced in trial order.
    """
    if (poly is None) == (model is None):
        raise PreconditionError("pass either poly or model")
    if poly is not None and not is_selfadjoint(poly):
        raise PreconditionError("oracle polynomial must be selfadjoint")
    if epsilon is None:
        epsilon = max(4.0 / spec.N, 1e-6)
    rngs = spec.trial_rngs()

    def one_trial(rng):
        if poly is not None:
            return _poly_eigs(spec, poly, rng)
        return _pencil_eigs(spec, model, b, rng)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            eig_sets = list(pool.map(one_trial, rngs))
    else:
        eig_sets = [one_trial(rng) for rng in rngs]
    lo = min(float(e.min()) for e in eig_sets)
    hi = max(float(e.max()) for e in eig_sets)
    pad = 1e-9 * max(1.0, abs(lo), abs(hi))
    edges = np.linspace(lo - pad, hi + pad, bins + 1)
    all_counts = np.stack([np.histogram(e, bins=edges)[0] for e in eig_sets]).astype(float)
    counts_mean = all_counts.mean(axis=0)
    counts_std = all_counts.std(axis=0, ddof=1) if spec.trials > 1 else np.zeros_like(counts_mean)

    if locations is None:
        locations = [lam] if poly is not None else [0.0]
    masses = {}
    for loc in locations:
        per_trial = np.array([kernel_mass_from_eigs(e, loc, epsilon) for e in eig_sets])
        est = float(per_trial.mean())
        se = float(per_trial.std(ddof=1) / np.sqrt(spec.trials)) if spec.trials > 1 else 0.0
        masses[float(loc)] = (est, se)

    return OracleReport(
        bin_edges=edges,
        counts_mean=counts_mean,
        counts_std=counts_std,
        spikes=_find_spikes(counts_mean, edges),
        masses=masses,
        N=spec.N,
        trials=spec.trials,
        seed=spec.seed,
        epsilon=float(epsilon),
    )
