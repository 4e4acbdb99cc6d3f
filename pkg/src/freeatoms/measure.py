"""Compactly supported probability measures on the real line.

A :class:`SpectralMeasure` is a finite list of atoms plus an optional
absolutely continuous part built from closed-form density families
(semicircle, arcsine, uniform) or tabulated densities.  The module
evaluates the scalar Cauchy transform G(z) = int dmu(t)/(z - t), its
reciprocal F = 1/G, and deterministic quantiles used by the random
matrix oracle.

Measures are validated at construction and rejected (never silently
renormalized) when the data is inconsistent.  Instances are immutable
and all operations are pure, so they are safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import HalfPlaneError, MeasureError, SchemaError

# Tolerance for construction-time consistency checks (mass budgets,
# piece normalization), distinct from quadrature refinement targets.
VALIDATION_TOL = 1e-8

# Target for adaptive Gauss-Legendre refinement: panels are subdivided
# until the coarse/fine estimates differ by less than this.
QUAD_TOL = 1e-12

_GL_ORDER = 32
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)
# mapped to [0, 1]
_GL01_NODES = 0.5 * (_GL_NODES + 1.0)
_GL01_WEIGHTS = 0.5 * _GL_WEIGHTS


# ---------------------------------------------------------------------------
# continuous density pieces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SemicirclePiece:
    """Semicircle density of given center and radius, unit mass before weighting."""

    center: float
    radius: float
    weight: float

    family = "semicircle"

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise MeasureError(f"semicircle radius must be positive, got {self.radius}")

    @property
    def interval(self):
        return (self.center - self.radius, self.center + self.radius)

    def unit_density(self, x):
        x = np.asarray(x, dtype=float)
        d = self.radius**2 - (x - self.center) ** 2
        return np.where(d > 0, 2.0 * np.sqrt(np.maximum(d, 0.0)) / (np.pi * self.radius**2), 0.0)

    def unit_cdf(self, x):
        c, r = self.center, self.radius
        u = np.clip((np.asarray(x, dtype=float) - c) / r, -1.0, 1.0)
        return 0.5 + (u * np.sqrt(1.0 - u**2) + np.arcsin(u)) / np.pi

    def unit_quantile(self, q):
        lo, hi = self.interval
        return brentq(lambda x: self.unit_cdf(x) - q, lo, hi, xtol=1e-14)

    def unit_mean(self):
        return self.center

    # parameterization s in [0,1] with int_0^1 f(t(s)) w(s) ds = int f dmu_unit
    def param_to_t(self, s):
        return self.center - self.radius * np.cos(np.pi * s)

    def param_weight(self, s):
        return 2.0 * np.sin(np.pi * s) ** 2

    def to_json_dict(self):
        return {"family": "semicircle", "center": self.center, "radius": self.radius,
                "weight": self.weight}


@dataclass(frozen=True)
class ArcsinePiece:
    """Arcsine density 1/(pi sqrt((x-a)(b-x))) on (a, b)."""

    a: float
    b: float
    weight: float

    family = "arcsine"

    def __post_init__(self):
        if not self.a < self.b:
            raise MeasureError(f"arcsine interval must satisfy a < b, got ({self.a}, {self.b})")

    @property
    def interval(self):
        return (self.a, self.b)

    def unit_density(self, x):
        x = np.asarray(x, dtype=float)
        d = (x - self.a) * (self.b - x)
        with np.errstate(divide="ignore"):
            out = np.where(d > 0, 1.0 / (np.pi * np.sqrt(np.maximum(d, 1e-300))), 0.0)
        return out

    def unit_cdf(self, x):
        u = np.clip((np.asarray(x, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)
        return (2.0 / np.pi) * np.arcsin(np.sqrt(u))

    def unit_quantile(self, q):
        return self.a + (self.b - self.a) * np.sin(0.5 * np.pi * q) ** 2

    def unit_mean(self):
        return 0.5 * (self.a + self.b)

    def param_to_t(self, s):
        mid = 0.5 * (self.a + self.b)
        half = 0.5 * (self.b - self.a)
        return mid - half * np.cos(np.pi * s)

    def param_weight(self, s):
        return np.ones_like(np.asarray(s, dtype=float))

    def to_json_dict(self):
        return {"family": "arcsine", "a": self.a, "b": self.b, "weight": self.weight}


@dataclass(frozen=True)
class UniformPiece:
    """Uniform density on (a, b)."""

    a: float
    b: float
    weight: float

    family = "uniform"

    def __post_init__(self):
        if not self.a < self.b:
            raise MeasureError(f"uniform interval must satisfy a < b, got ({self.a}, {self.b})")

    @property
    def interval(self):
        return (self.a, self.b)

    def unit_density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.a) & (x <= self.b)
        return np.where(inside, 1.0 / (self.b - self.a), 0.0)

    def unit_cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def unit_quantile(self, q):
        return self.a + (self.b - self.a) * q

    def unit_mean(self):
        return 0.5 * (self.a + self.b)

    def param_to_t(self, s):
        return self.a + (self.b - self.a) * np.asarray(s, dtype=float)

    def param_weight(self, s):
        return np.ones_like(np.asarray(s, dtype=float))

    def to_json_dict(self):
        return {"family": "uniform", "a": self.a, "b": self.b, "weight": self.weight}


@dataclass(frozen=True)
class TablePiece:
    """Piecewise-linear tabulated density.

    ``values`` must be nonnegative and trapezoid-integrate to 1 over
    ``nodes`` (unit normalization); the piece is rejected otherwise.
    """

    nodes: tuple
    values: tuple
    weight: float

    family = "table"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2 or nodes.shape != values.shape:
            raise MeasureError("table piece needs matching 1-d nodes/values with >= 2 entries")
        if np.any(np.diff(nodes) <= 0):
            raise MeasureError("table nodes must be strictly increasing")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise MeasureError("table density values must be finite and >= 0")
        total = np.trapezoid(values, nodes)
        if abs(total - 1.0) > 1e-6:
            raise MeasureError(
                f"table density must be unit-normalized (trapezoid mass {total:.3e}); "
                "scale the values or adjust the weight instead"
            )
        object.__setattr__(self, "nodes", tuple(nodes.tolist()))
        object.__setattr__(self, "values", tuple(values.tolist()))

    @property
    def interval(self):
        return (self.nodes[0], self.nodes[-1])

    def unit_density(self, x):
        return np.interp(np.asarray(x, dtype=float), self.nodes, self.values, left=0.0, right=0.0)

    def unit_cdf(self, x):
        nodes = np.asarray(self.nodes)
        values = np.asarray(self.values)
        cum = np.concatenate([[0.0], np.cumsum(np.diff(nodes) * 0.5 * (values[1:] + values[:-1]))])
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, nodes.size - 2)
        x0 = nodes[idx]
        dx = np.clip(x - x0, 0.0, nodes[idx + 1] - x0)
        v0 = values[idx]
        slope = (values[idx + 1] - v0) / (nodes[idx + 1] - x0)
        seg = v0 * dx + 0.5 * slope * dx**2
        out = cum[idx] + np.where(x < nodes[0], 0.0, seg)
        return np.clip(np.where(x >= nodes[-1], cum[-1], out) / cum[-1], 0.0, 1.0)

    def unit_quantile(self, q):
        lo, hi = self.interval
        return brentq(lambda x: self.unit_cdf(x) - q, lo, hi, xtol=1e-14)

    def unit_mean(self):
        nodes = np.asarray(self.nodes)
        values = np.asarray(self.values)
        return float(np.trapezoid(nodes * values, nodes))

    def param_to_t(self, s):
        lo, hi = self.interval
        return lo + (hi - lo) * np.asarray(s, dtype=float)

    def param_weight(self, s):
        lo, hi = self.interval
        return self.unit_density(self.param_to_t(s)) * (hi - lo)

    def to_json_dict(self):
        return {"family": "table", "nodes": list(self.nodes), "values": list(self.values),
                "weight": self.weight}


_PIECE_CLASSES = {
    "semicircle": SemicirclePiece,
    "arcsine": ArcsinePiece,
    "uniform": UniformPiece,
    "table": TablePiece,
}


def piece_from_json_dict(d):
    """Build a density piece from its JSON dictionary form."""
    try:
        family = d["family"]
        weight = float(d["weight"])
        if family == "semicircle":
            return SemicirclePiece(float(d["center"]), float(d["radius"]), weight)
        if family == "arcsine":
            return ArcsinePiece(float(d["a"]), float(d["b"]), weight)
        if family == "uniform":
            return UniformPiece(float(d["a"]), float(d["b"]), weight)
        if family == "table":
            return TablePiece(tuple(d["nodes"]), tuple(d["values"]), weight)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad continuous piece {d!r}: {exc}") from exc
    raise SchemaError(f"unknown density family {family!r}")


# ---------------------------------------------------------------------------
# adaptive quadrature against one unit-mass piece
# ---------------------------------------------------------------------------


def integrate_piece(f, piece, rtol=QUAD_TOL, max_depth=30):
    """Integrate f against the unit-mass density of ``piece``.

    ``f`` maps an array of points t (shape (K,)) to an array whose first
    axis has length K; remaining axes pass through (matrix-valued
    integrands are supported).  Panels in the parameterization domain
    are bisected until coarse and fine Gauss-Legendre estimates agree.
    """

    def panel_estimate(lo, hi):
        s = lo + (hi - lo) * _GL01_NODES
        t = piece.param_to_t(s)
        w = piece.param_weight(s) * (hi - lo) * _GL01_WEIGHTS
        vals = np.asarray(f(np.asarray(t, dtype=float)))
        if not np.all(np.isfinite(vals)):
            raise MeasureError("integrand returned a non-finite value (ill-formed density?)")
        return np.tensordot(w, vals, axes=(0, 0))

    total_scale = 1.0
    result = None
    stack = [(0.0, 1.0, panel_estimate(0.0, 1.0), 0)]
    while stack:
        lo, hi, coarse, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left = panel_estimate(lo, mid)
        right = panel_estimate(mid, hi)
        fine = left + right
        err = np.max(np.abs(fine - coarse))
        if err <= rtol * total_scale * max(1.0, hi - lo) or depth >= max_depth:
            if depth >= max_depth and err > 1e6 * rtol:
                raise MeasureError(
                    f"quadrature failed to converge (panel error {err:.3e} at depth {depth})"
                )
            result = fine if result is None else result + fine
            total_scale = max(total_scale, float(np.max(np.abs(result))))
        else:
            stack.append((lo, mid, left, depth + 1))
            stack.append((mid, hi, right, depth + 1))
    return result


# ---------------------------------------------------------------------------
# the measure itself
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralMeasure:
    """Compactly supported probability measure: atoms + continuous pieces.

    Total mass must be exactly 1: atom masses are strictly positive and
    the piece weights account for the rest.  ``support`` is explicit and
    must contain all atoms and piece intervals.
    """

    atoms: tuple = ()
    continuous: tuple = ()
    support: tuple = None
    _validated: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        atoms = tuple((float(x), float(m)) for x, m in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "continuous", tuple(self.continuous))
        if self.support is None:
            raise MeasureError("support bounds are required")
        lo, hi = float(self.support[0]), float(self.support[1])
        object.__setattr__(self, "support", (lo, hi))
        self._validate()
        object.__setattr__(self, "_validated", True)

    def _validate(self):
        lo, hi = self.support
        if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
            raise MeasureError(f"bad support bounds {self.support}")
        atom_mass = 0.0
        locs = [x for x, _ in self.atoms]
        if len(set(locs)) != len(locs):
            raise MeasureError("atom locations must be pairwise distinct")
        for x, m in self.atoms:
            if not (m > 0 and math.isfinite(m)):
                raise MeasureError(f"atom mass must be strictly positive, got {m} at {x}")
            if not (lo - VALIDATION_TOL <= x <= hi + VALIDATION_TOL):
                raise MeasureError(f"atom at {x} outside support {self.support}")
            atom_mass += m
        if atom_mass > 1.0 + VALIDATION_TOL:
            raise MeasureError(f"atom masses sum to {atom_mass} > 1")
        cont_weight = 0.0
        intervals = []
        for piece in self.continuous:
            if not (piece.weight > 0 and math.isfinite(piece.weight)):
                raise MeasureError(f"piece weight must be strictly positive, got {piece.weight}")
            plo, phi = piece.interval
            if plo < lo - VALIDATION_TOL or phi > hi + VALIDATION_TOL:
                raise MeasureError(f"piece interval {piece.interval} outside support {self.support}")
            intervals.append((plo, phi))
            cont_weight += piece.weight
            # density sanity at the base quadrature nodes
            dens = piece.unit_density(piece.param_to_t(_GL01_NODES))
            if not np.all(np.isfinite(dens)) or np.any(dens < -VALIDATION_TOL):
                raise MeasureError("piece density is negative or non-finite at quadrature nodes")
            mass = integrate_piece(lambda t: np.ones_like(t), piece, rtol=1e-10)
            if abs(mass - 1.0) > 1e-7:
                raise MeasureError(f"piece quadrature mass {mass} deviates from 1")
        intervals.sort()
        for (a0, b0), (a1, b1) in zip(intervals, intervals[1:]):
            if a1 < b0 - VALIDATION_TOL:
                raise MeasureError("continuous piece intervals overlap")
        if abs(atom_mass + cont_weight - 1.0) > VALIDATION_TOL:
            raise MeasureError(
                f"total mass {atom_mass + cont_weight} != 1 (atoms {atom_mass}, continuous {cont_weight})"
            )

    # -- basic descriptors -------------------------------------------------

    @property
    def atom_mass(self):
        return sum(m for _, m in self.atoms)

    @property
    def is_atomless(self):
        return not self.atoms

    def atom_mass_at(self, x, tol=1e-12):
        for loc, m in self.atoms:
            if abs(loc - x) <= tol:
                return m
        return 0.0

    def mean(self):
        total = sum(x * m for x, m in self.atoms)
        total += sum(p.weight * p.unit_mean() for p in self.continuous)
        return total

    def cdf(self, x):
        """Right-continuous distribution function."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x, dtype=float)
        for loc, m in self.atoms:
            out = out + m * (x >= loc)
        for p in self.continuous:
            out = out + p.weight * p.unit_cdf(x)
        return out

    def integrate(self, f, rtol=QUAD_TOL):
        """Integrate a (possibly matrix-valued) function against the measure."""
        total = None
        for loc, m in self.atoms:
            v = m * np.asarray(f(np.asarray([loc]))[0])
            total = v if total is None else total + v
        for p in self.continuous:
            v = p.weight * integrate_piece(f, p, rtol=rtol)
            total = v if total is None else total + v
        return total

    # -- serialization -----------------------------------------------------

    def to_json_dict(self):
        return {
            "atoms": [{"x": x, "m": m} for x, m in self.atoms],
            "continuous": [p.to_json_dict() for p in self.continuous],
            "support": [self.support[0], self.support[1]],
        }

    @classmethod
    def from_json_dict(cls, d):
        try:
            atoms = tuple((float(a["x"]), float(a["m"])) for a in d.get("atoms", []))
            pieces = tuple(piece_from_json_dict(p) for p in d.get("continuous", []))
            support = d["support"]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad measure specification: {exc}") from exc
        return cls(atoms=atoms, continuous=pieces, support=(support[0], support[1]))


# ---------------------------------------------------------------------------
# factories
# ---------------------------------------------------------------------------


def _hull(points):
    return (min(points), max(points))


def point_mass(x):
    """The Dirac measure at x."""
    return SpectralMeasure(atoms=((x, 1.0),), support=(x, x))


def atomic_measure(pairs):
    """Purely atomic measure from (location, mass) pairs summing to 1."""
    locs = [x for x, _ in pairs]
    return SpectralMeasure(atoms=tuple(pairs), support=_hull(locs))


def bernoulli_symmetric():
    """The symmetric two-point measure at -1 and +1."""
    return atomic_measure([(-1.0, 0.5), (1.0, 0.5)])


def semicircle_measure(center=0.0, radius=2.0):
    piece = SemicirclePiece(center, radius, 1.0)
    return SpectralMeasure(continuous=(piece,), support=piece.interval)


def arcsine_measure(a=-2.0, b=2.0):
    piece = ArcsinePiece(a, b, 1.0)
    return SpectralMeasure(continuous=(piece,), support=piece.interval)


def uniform_measure(a=0.0, b=1.0):
    piece = UniformPiece(a, b, 1.0)
    return SpectralMeasure(continuous=(piece,), support=piece.interval)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def cauchy_scalar(mu: SpectralMeasure, z: complex) -> complex:
    """Cauchy transform int dmu(t)/(z - t) for Im z > 0; maps into Im < 0."""
    z = complex(z)
    if not z.imag > 0:
        raise HalfPlaneError(f"cauchy_scalar requires Im z > 0, got {z}")
    total = 0.0 + 0.0j
    for loc, m in mu.atoms:
        total += m / (z - loc)
    for p in mu.continuous:
        total += p.weight * complex(integrate_piece(lambda t: 1.0 / (z - t), p))
    return total


def f_scalar(mu: SpectralMeasure, z: complex) -> complex:
    """Reciprocal Cauchy transform F = 1/G; a self-map of the upper half-plane."""
    g = cauchy_scalar(mu, z)
    if abs(g) == 0.0:
        raise MeasureError("Cauchy transform vanished in the upper half-plane (broken measure)")
    return 1.0 / g


def quantiles(mu: SpectralMeasure, N: int) -> np.ndarray:
    """Deterministic quantile discretization: value i is the ((i - 1/2)/N)-quantile.

    The output is nondecreasing and an atom of mass m receives floor(mN)
    or ceil(mN) copies.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    lo, hi = mu.support
    span = max(hi - lo, 1.0)
    qs = (np.arange(N) + 0.5) / N
    out = np.empty(N)
    for i, q in enumerate(qs):
        a, b = lo - 1.0, hi + 1.0
        # inf{x : F(x) >= q} by bisection on the right-continuous cdf
        for _ in range(80):
            mid = 0.5 * (a + b)
            if mu.cdf(mid) >= q:
                b = mid
            else:
                a = mid
        x = b
        for loc, _m in mu.atoms:
            if abs(x - loc) <= 4e-12 * span:
                x = loc
                break
        out[i] = x
    return np.minimum.accumulate(out[::-1])[::-1]


# closed forms used as machine-precision self-checks in tests


def cauchy_semicircle(center, radius, z):
    """Closed-form Cauchy transform of the semicircle law."""
    w = z - center
    root = np.sqrt(w - radius) * np.sqrt(w + radius)
    return 2.0 * (w - root) / radius**2


def cauchy_arcsine(a, b, z):
    """Closed-form Cauchy transform of the arcsine law on (a, b)."""
    return 1.0 / (np.sqrt(z - a) * np.sqrt(z - b))


def cauchy_uniform(a, b, z):
    """Closed-form Cauchy transform of the uniform law on (a, b)."""
    return (np.log(z - a) - np.log(z - b)) / (b - a)
