"""Geometric Brascamp-Lieb data: modeling, validation, rank-one expansion.

A datum is a list of subspaces E_i with positive weights c_i on a common
R^n; it is valid when the weighted projections resolve the identity,
sum_i c_i P_{E_i} = I_n.  Expanding each E_i into its canonical frame
vectors (each carrying the weight c_i) turns a valid datum into a
Parseval frame, the rank-one normal form every structural algorithm
downstream actually runs on.

Weights may be entered as numbers or as strings ("2/3", "0.5"); strings
are parsed exactly as rationals and converted once to float, with the
validation tolerance absorbing the representation error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import CapError, InputError, InternalError
from .subspace import (
    DEFAULT_TOL,
    Subspace,
    Tolerance,
    full_subspace,
    orthonormalize,
    projection_matrix,
)

MAX_ENTRIES = 64
MAX_AMBIENT_DIM = 32


def parse_weight(w) -> float:
    """Accept a positive number or an exact-rational string like '2/3'."""
    if isinstance(w, str):
        try:
            value = float(Fraction(w))
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"cannot parse weight {w!r}") from exc
    else:
        value = float(w)
    if not np.isfinite(value) or value <= 0.0:
        raise InputError(f"weights must be positive and finite, got {value}")
    return value


@dataclass
class GeometricBLDatum:
    """Subspaces E_i with weights c_i > 0 on a common ambient R^n.

    The `validated` flag is set only by :func:`validate_datum`; operations
    that assume sum_i c_i P_{E_i} = I_n refuse unvalidated input.
    """

    ambient_dim: int
    entries: tuple  # of (Subspace, float)
    validated: bool = field(default=False, compare=False)

    def __post_init__(self):
        n = self.ambient_dim
        if not (1 <= n <= MAX_AMBIENT_DIM):
            raise CapError("ambient_dim", MAX_AMBIENT_DIM, n)
        entries = tuple((E, parse_weight(c)) for E, c in self.entries)
        if not (1 <= len(entries) <= MAX_ENTRIES):
            raise CapError("entries", MAX_ENTRIES, len(entries))
        for E, _ in entries:
            if E.ambient_dim != n:
                raise InputError(
                    f"entry ambient dimension {E.ambient_dim} does not match datum n={n}"
                )
            if E.dim < 1:
                raise InputError("datum entries must be non-zero subspaces")
        self.entries = entries

    @property
    def k(self) -> int:
        return len(self.entries)

    def weighted_projection_sum(self) -> np.ndarray:
        M = np.zeros((self.ambient_dim, self.ambient_dim))
        for E, c in self.entries:
            M += c * projection_matrix(E)
        return M

    def to_json(self) -> dict:
        return {
            "n": self.ambient_dim,
            "entries": [{"c": float(c), "E": E.to_json()} for E, c in self.entries],
        }

    @staticmethod
    def from_json(obj: dict, tol: Tolerance = DEFAULT_TOL) -> "GeometricBLDatum":
        try:
            n = int(obj["n"])
            raw = obj["entries"]
        except (KeyError, TypeError) as exc:
            raise InputError(f"datum JSON needs 'n' and 'entries': {exc}") from exc
        entries = []
        for e in raw:
            try:
                c = e["c"]
                E = Subspace.from_json(e["E"], tol)
            except (KeyError, TypeError) as exc:
                raise InputError(f"datum entry needs 'c' and 'E': {exc}") from exc
            entries.append((E, c))
        return GeometricBLDatum(n, tuple(entries))


@dataclass(frozen=True)
class ValidationReport:
    is_valid: bool
    defect: float          # max-norm of sum c_i P_{E_i} - I_n
    trace_defect: float    # |sum c_i dim E_i - n|
    entry_dims: tuple

    def to_json(self) -> dict:
        return {
            "is_valid": self.is_valid,
            "defect": self.defect,
            "trace_defect": self.trace_defect,
            "entry_dims": list(self.entry_dims),
        }


@dataclass(frozen=True)
class RankOneDatum:
    """Parseval frame: unit vectors u_j with sum_j c_j u_j u_j^T = I_n.

    `origin[j]` records which (entry index, frame column) of the parent
    datum produced vector j.
    """

    ambient_dim: int
    vectors: np.ndarray   # (k, n), unit rows
    weights: np.ndarray   # (k,), positive
    origin: tuple         # of (entry_index, basis_index)

    @property
    def k(self) -> int:
        return self.vectors.shape[0]

    def gram_defect(self) -> float:
        M = (self.vectors.T * self.weights) @ self.vectors
        return float(np.abs(M - np.eye(self.ambient_dim)).max())


def validate_datum(d: GeometricBLDatum, tol: Tolerance = DEFAULT_TOL) -> ValidationReport:
    """Check sum c_i P_{E_i} = I_n; never raises on invalid data.

    The trace identity sum c_i dim E_i = n is reported separately: it is
    a consequence of the defining equation (compare traces) and gives a
    cheap scalar diagnostic.
    """
    n = d.ambient_dim
    M = d.weighted_projection_sum()
    defect = float(np.abs(M - np.eye(n)).max())
    trace_defect = float(abs(sum(c * E.dim for E, c in d.entries) - n))
    report = ValidationReport(
        is_valid=defect <= tol.residual_tol,
        defect=defect,
        trace_defect=trace_defect,
        entry_dims=tuple(E.dim for E, _ in d.entries),
    )
    d.validated = report.is_valid
    return report


def require_validated(d: GeometricBLDatum):
    if not d.validated:
        raise InputError("datum has not passed validate_datum; validate it first")


def rank_one_expansion(d: GeometricBLDatum) -> RankOneDatum:
    """Expand every entry into its canonical frame vectors, weight c_i each.

    c_i P_{E_i} = sum_j c_i u_j u_j^T over the frame of E_i, so the output
    inherits the Parseval identity from the datum.
    """
    require_validated(d)
    vecs, ws, origin = [], [], []
    for i, (E, c) in enumerate(d.entries):
        for j, row in enumerate(E.frame):
            vecs.append(row)
            ws.append(c)
            origin.append((i, j))
    r = RankOneDatum(
        ambient_dim=d.ambient_dim,
        vectors=np.array(vecs),
        weights=np.array(ws),
        origin=tuple(origin),
    )
    if r.gram_defect() > 10 * DEFAULT_TOL.residual_tol:
        raise InternalError(
            f"rank-one expansion lost the Parseval identity (defect {r.gram_defect():.3e})"
        )
    return r


def make_datum_from_cover(cover) -> GeometricBLDatum:
    """Datum of a uniform cover: E_i = span{e_j : j in sigma_i}, c_i = 1/s.

    Each coordinate axis is hit by exactly s sets, so the weighted
    projections sum to the identity exactly.
    """
    from .covers import validate_cover

    ok, counts = validate_cover(cover)
    if not ok:
        raise InputError(f"cover is not {cover.s}-uniform (multiplicities {counts})")
    n = cover.n
    entries = []
    for sigma in cover.sets:
        rows = np.zeros((len(sigma), n))
        for r, j in enumerate(sorted(sigma)):
            rows[r, j - 1] = 1.0
        entries.append((Subspace(n, rows), 1.0 / cover.s))
    d = GeometricBLDatum(n, tuple(entries))
    report = validate_datum(d)
    if not report.is_valid:
        raise InternalError(f"cover datum failed validation (defect {report.defect:.3e})")
    return d


# ---------------------------------------------------------------------------
# Constructions used throughout the tests: named building blocks plus a
# seeded random generator that composes them.  Every output validates.
# ---------------------------------------------------------------------------

def axis_datum(n: int) -> GeometricBLDatum:
    """The n coordinate axes with weight 1 each."""
    d = GeometricBLDatum(n, tuple((orthonormalize([np.eye(n)[i]]), 1.0) for i in range(n)))
    validate_datum(d)
    return d


def holder_datum(n: int, weights) -> GeometricBLDatum:
    """E_i = R^n repeated, with weights summing to 1."""
    ws = [parse_weight(w) for w in weights]
    d = GeometricBLDatum(n, tuple((full_subspace(n), w) for w in ws))
    validate_datum(d)
    return d


def planar_lines_datum(m: int) -> GeometricBLDatum:
    """m >= 2 equally spaced lines through the origin of R^2, weight 2/m.

    The lines at angles pi*j/m form a tight frame, so the datum is valid;
    for m >= 3 no two lines are orthogonal and the whole plane is the only
    critical subspace of the configuration.
    """
    if m < 2:
        raise InputError("need at least two lines")
    entries = []
    for j in range(m):
        a = np.pi * j / m
        entries.append((orthonormalize([np.array([np.cos(a), np.sin(a)])]), 2.0 / m))
    d = GeometricBLDatum(2, tuple(entries))
    validate_datum(d)
    return d


def paired_planes_datum(m: int = 3) -> GeometricBLDatum:
    """m two-dimensional entries in R^4 pairing matched lines of two planes.

    Entry i is spanned by the i-th of m equally spaced unit vectors in the
    (x1,x2)-plane together with the matching vector in the (x3,x4)-plane,
    each with weight 2/m.  For m = 3 this is the configuration with a
    whole circle of two-dimensional critical subspaces: rotating the pair
    by any common angle yields another one.
    """
    if m < 3:
        raise InputError("pairing needs m >= 3 to be indecomposable")
    entries = []
    for j in range(m):
        a = np.pi * j / m
        u = np.array([np.cos(a), np.sin(a), 0.0, 0.0])
        v = np.array([0.0, 0.0, np.cos(a), np.sin(a)])
        entries.append((orthonormalize([u, v]), 2.0 / m))
    d = GeometricBLDatum(4, tuple(entries))
    validate_datum(d)
    return d


def rotate_datum(d: GeometricBLDatum, Q: np.ndarray) -> GeometricBLDatum:
    """Apply an orthogonal map to every entry (validity is preserved)."""
    n = d.ambient_dim
    entries = tuple(
        (orthonormalize([Q @ row for row in E.frame], ambient_dim=n), c)
        for E, c in d.entries
    )
    out = GeometricBLDatum(n, entries)
    validate_datum(out)
    return out


def direct_sum_data(parts) -> GeometricBLDatum:
    """Embed data on R^{n_1}, R^{n_2}, ... as blocks of R^{n_1 + n_2 + ...}."""
    parts = list(parts)
    n = sum(p.ambient_dim for p in parts)
    if n > MAX_AMBIENT_DIM:
        raise CapError("ambient_dim", MAX_AMBIENT_DIM, n)
    entries = []
    off = 0
    for p in parts:
        for E, c in p.entries:
            rows = np.zeros((E.dim, n))
            rows[:, off:off + p.ambient_dim] = E.frame
            entries.append((Subspace(n, rows), c))
        off += p.ambient_dim
    d = GeometricBLDatum(n, tuple(entries))
    validate_datum(d)
    return d


def pair_data(a: GeometricBLDatum, b: GeometricBLDatum) -> GeometricBLDatum:
    """Merge two data with identical weight lists into one on R^{na+nb}.

    Entry i becomes the direct sum of E_i^a and E_i^b (orthogonal
    blocks), keeping weight c_i; since both blocks resolve their
    identities with the same weights, the merged datum is valid.  This
    is exactly how the paired planes construction arises from two line
    configurations.
    """
    if a.k != b.k:
        raise InputError("pairing needs equally many entries")
    wa = [c for _, c in a.entries]
    wb = [c for _, c in b.entries]
    if any(abs(x - y) > 1e-12 for x, y in zip(wa, wb)):
        raise InputError("pairing needs identical weight lists")
    n = a.ambient_dim + b.ambient_dim
    entries = []
    for (Ea, c), (Eb, _) in zip(a.entries, b.entries):
        rows = np.zeros((Ea.dim + Eb.dim, n))
        rows[:Ea.dim, :a.ambient_dim] = Ea.frame
        rows[Ea.dim:, a.ambient_dim:] = Eb.frame
        entries.append((Subspace(n, rows), c))
    d = GeometricBLDatum(n, tuple(entries))
    validate_datum(d)
    return d


def random_rotation(rng, n: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def random_subspace(rng, n: int, dim: int) -> Subspace:
    if dim == 0:
        return orthonormalize([], ambient_dim=n)
    return orthonormalize(rng.standard_normal((dim, n)), ambient_dim=n)


def random_datum(rng, *, max_dim: int = 6, max_vectors: int = 12,
                 rotate: bool = True) -> GeometricBLDatum:
    """Seeded random valid datum built from the constructions above.

    Blocks are axes, Hoelder repeats, planar line frames, and pairings of
    two line frames; blocks are direct-summed and optionally rotated.
    The expansion size (sum of entry dimensions) stays within
    max_vectors and the ambient dimension within max_dim.
    """
    blocks = []
    dim_used = 0
    vecs_used = 0
    while True:
        room_d = max_dim - dim_used
        room_v = max_vectors - vecs_used
        if room_d <= 0 or room_v <= 0:
            break
        choices = ["axis"]
        if room_d >= 1 and room_v >= 2:
            choices.append("holder")
        if room_d >= 2 and room_v >= 3:
            choices.append("lines")
        if room_d >= 4 and room_v >= 6:
            choices.append("paired")
        kind = choices[rng.integers(len(choices))]
        if kind == "axis":
            blocks.append(axis_datum(1))
            dim_used += 1
            vecs_used += 1
        elif kind == "holder":
            dim = int(rng.integers(1, min(2, room_d, room_v // 2) + 1))
            parts = int(rng.integers(2, min(3, room_v // dim) + 1))
            w = rng.dirichlet(np.ones(parts) * 5.0)
            w = np.clip(w, 0.05, None)
            w = w / w.sum()
            blocks.append(holder_datum(dim, w))
            dim_used += dim
            vecs_used += dim * parts
        elif kind == "lines":
            m = int(rng.integers(3, min(4, room_v) + 1))
            blocks.append(planar_lines_datum(m))
            dim_used += 2
            vecs_used += m
        else:
            m = int(rng.integers(3, min(4, room_v // 2) + 1))
            blocks.append(paired_planes_datum(m))
            dim_used += 4
            vecs_used += 2 * m
        if dim_used >= max_dim or rng.random() < 0.25:
            break
    d = direct_sum_data(blocks) if len(blocks) > 1 else blocks[0]
    if rotate and rng.random() < 0.8:
        d = rotate_datum(d, random_rotation(rng, d.ambient_dim))
    report = validate_datum(d)
    if not report.is_valid:
        raise InternalError(f"random datum failed validation (defect {report.defect:.3e})")
    return d
