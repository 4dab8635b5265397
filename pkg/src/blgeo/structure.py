"""Critical-subspace structure of a geometric Brascamp-Lieb datum.

A non-zero subspace V is critical when sum_i c_i dim(E_i cap V) = dim V,
equivalently when every E_i splits as (E_i cap V) + (E_i cap V-perp).
Both characterizations are computed and cross-checked; a disagreement is
an internal error, never silently resolved.

The finest pairwise-orthogonal critical decomposition is read off the
rank-one expansion: two expansion vectors are related when they sit in a
common minimal dependent set, and for a Parseval frame those classes are
exactly the connected components of the non-orthogonality graph.  The
independent subspaces are the non-zero intersections cap_i E_i^(eps(i))
over sign patterns eps, with E^(0) = E and E^(1) = E-perp; whatever is
left orthogonally is the dependent subspace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datum import GeometricBLDatum, RankOneDatum, rank_one_expansion, require_validated, validate_datum
from .errors import CapError, InputError, InternalError
from .subspace import (
    DEFAULT_TOL,
    Subspace,
    Tolerance,
    complement,
    contains,
    equal,
    full_subspace,
    intersect,
    orthonormalize,
    subspace_sum,
)

ENUMERATION_CAP = 24  # sign patterns are 2^k; beyond this we refuse

INTEGER_SNAP_TOL = 1e-6  # weighted dimension sums of valid data are near-integers


@dataclass(frozen=True)
class CriticalityReport:
    subspace: Subspace
    weighted_dim_sum: float
    dim: int
    is_critical: bool
    splitting_ok: bool

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "weighted_dim_sum": self.weighted_dim_sum,
            "is_critical": self.is_critical,
            "splitting_ok": self.splitting_ok,
            "subspace": self.subspace.to_json(),
        }


@dataclass(frozen=True)
class IndependentSubspace:
    subspace: Subspace
    weight_sum: float
    owners: tuple  # entry indices i with F_j contained in E_i

    def to_json(self) -> dict:
        return {
            "subspace": self.subspace.to_json(),
            "weight_sum": self.weight_sum,
            "owners": list(self.owners),
        }


@dataclass(frozen=True)
class StructureReport:
    independent_subspaces: tuple  # of IndependentSubspace
    dependent_subspace: Subspace
    indecomposable_decomposition: tuple  # of Subspace
    rank_one_classes: tuple  # partition of expansion vector indices
    decomposition_canonical_only: bool

    def to_json(self) -> dict:
        return {
            "independent_subspaces": [f.to_json() for f in self.independent_subspaces],
            "dependent_subspace": self.dependent_subspace.to_json(),
            "indecomposable_decomposition": [V.to_json() for V in self.indecomposable_decomposition],
            "rank_one_classes": [list(c) for c in self.rank_one_classes],
            "decomposition_canonical_only": self.decomposition_canonical_only,
        }


def is_critical(d: GeometricBLDatum, V: Subspace, tol: Tolerance = DEFAULT_TOL) -> CriticalityReport:
    """Test criticality of V through both characterizations.

    The weighted dimension sum is snapped to the nearest integer before
    comparing with dim V (dimensions are integers, weights are floats;
    criticality is a discrete property).  The splitting test
    E_i = (E_i cap V) + (E_i cap V-perp) must agree, otherwise the rank
    thresholds are inconsistent and we raise instead of guessing.
    """
    require_validated(d)
    if V.ambient_dim != d.ambient_dim:
        raise InputError("subspace ambient dimension does not match the datum")
    if V.dim == 0:
        raise InputError("criticality is defined for non-zero subspaces only")
    Vp = complement(V, tol)
    wds = 0.0
    splitting_ok = True
    for E, c in d.entries:
        EV = intersect(E, V, tol)
        EVp = intersect(E, Vp, tol)
        wds += c * EV.dim
        if not equal(E, subspace_sum(EV, EVp, tol), tol):
            splitting_ok = False
    near_int = abs(wds - round(wds)) <= INTEGER_SNAP_TOL
    dim_match = near_int and int(round(wds)) == V.dim
    if dim_match != splitting_ok:
        raise InternalError(
            "criticality characterizations disagree: "
            f"weighted dim sum {wds:.12g} vs dim {V.dim}, splitting_ok={splitting_ok}"
        )
    return CriticalityReport(
        subspace=V,
        weighted_dim_sum=float(wds),
        dim=V.dim,
        is_critical=dim_match and splitting_ok,
        splitting_ok=splitting_ok,
    )


def bowtie_classes(r: RankOneDatum, tol: Tolerance = DEFAULT_TOL) -> tuple:
    """Partition of the expansion vectors into indecomposable classes.

    Connected components of the graph with an edge where |<u_i, u_j>|
    exceeds the residual tolerance.  For a Parseval frame the spans of
    the classes are pairwise orthogonal, which makes the component
    relation coincide with membership in a common minimal dependent set
    (the matroid-circuit relation); the exponential circuit search is
    kept only as a small-instance test oracle.
    """
    k = r.k
    gram = np.abs(r.vectors @ r.vectors.T)
    parent = list(range(k))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(k):
        for j in range(i + 1, k):
            if gram[i, j] > tol.residual_tol:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups = {}
    for i in range(k):
        groups.setdefault(find(i), []).append(i)
    return tuple(sorted((tuple(sorted(g)) for g in groups.values()), key=lambda g: g[0]))


def indecomposable_decomposition(d: GeometricBLDatum, tol: Tolerance = DEFAULT_TOL) -> list:
    """Pairwise-orthogonal indecomposable critical subspaces spanning R^n.

    Computed as the class spans of the canonical rank-one expansion.
    Every output is verified critical; the direct sum must be all of R^n.
    """
    require_validated(d)
    r = rank_one_expansion(d)
    classes = bowtie_classes(r, tol)
    spans = [orthonormalize(r.vectors[list(cls)], tol, ambient_dim=d.ambient_dim) for cls in classes]
    total = sum(V.dim for V in spans)
    if total != d.ambient_dim:
        raise InternalError(
            f"class spans have total dimension {total}, expected {d.ambient_dim}"
        )
    for V in spans:
        rep = is_critical(d, V, tol)
        if not rep.is_critical:
            raise InternalError("a rank-one class span failed the criticality test")
    spans.sort(key=lambda V: (V.dim, tuple(np.round(V.frame, 9).ravel())))
    return spans


def independent_subspaces(d: GeometricBLDatum, tol: Tolerance = DEFAULT_TOL) -> StructureReport:
    """Independent subspaces, dependent subspace, and the class structure.

    Sign patterns are walked depth-first, intersecting incrementally and
    pruning as soon as the running intersection hits {0}; with k entries
    that is at most 2^k leaves but typically far fewer.
    """
    require_validated(d)
    if d.k > ENUMERATION_CAP:
        raise CapError("independent-subspace enumeration", ENUMERATION_CAP, d.k)
    n = d.ambient_dim
    comps = [complement(E, tol) for E, _ in d.entries]
    found = []

    def walk(i: int, W: Subspace):
        if W.dim == 0:
            return
        if i == d.k:
            found.append(W)
            return
        walk(i + 1, intersect(W, d.entries[i][0], tol))
        walk(i + 1, intersect(W, comps[i], tol))

    walk(0, full_subspace(n))

    independents = []
    for F in found:
        owners = tuple(i for i, (E, _) in enumerate(d.entries) if contains(E, F, tol))
        wsum = float(sum(d.entries[i][1] for i in owners))
        if abs(wsum - 1.0) > 1e-9:
            raise InternalError(
                f"independent subspace has owner weight sum {wsum:.12g}, expected 1"
            )
        independents.append(IndependentSubspace(F, wsum, owners))
    independents.sort(key=lambda f: (f.subspace.dim, tuple(np.round(f.subspace.frame, 9).ravel())))

    for a in range(len(independents)):
        for b in range(a + 1, len(independents)):
            Fa, Fb = independents[a].subspace, independents[b].subspace
            if np.abs(Fa.frame @ Fb.frame.T).max() > 1e-9:
                raise InternalError("independent subspaces are not pairwise orthogonal")

    if independents:
        span = orthonormalize(
            np.concatenate([f.subspace.frame for f in independents]), tol, ambient_dim=n
        )
        dep = complement(span, tol)
    else:
        dep = full_subspace(n)
    if dep.dim + sum(f.subspace.dim for f in independents) != n:
        raise InternalError("independent/dependent dimensions do not add up to n")

    r = rank_one_expansion(d)
    return StructureReport(
        independent_subspaces=tuple(independents),
        dependent_subspace=dep,
        indecomposable_decomposition=tuple(indecomposable_decomposition(d, tol)),
        rank_one_classes=bowtie_classes(r, tol),
        decomposition_canonical_only=any(E.dim >= 2 for E, _ in d.entries),
    )


def restrict_datum(d: GeometricBLDatum, V: Subspace, tol: Tolerance = DEFAULT_TOL) -> GeometricBLDatum:
    """Restrict a datum to a critical subspace V, in V's own coordinates.

    Keeps the entries with E_i cap V != {0}; criticality of V guarantees
    sum c_i P_{E_i cap V} = I_V, so the output validates in dim V.
    """
    rep = is_critical(d, V, tol)
    if not rep.is_critical:
        raise InputError("restriction requires a critical subspace")
    B = V.basis  # n x dimV, orthonormal columns
    entries = []
    for E, c in d.entries:
        W = intersect(E, V, tol)
        if W.dim == 0:
            continue
        coords = (B.T @ W.basis).T  # rows in V coordinates, orthonormal
        entries.append((orthonormalize(coords, tol, ambient_dim=V.dim), c))
    out = GeometricBLDatum(V.dim, tuple(entries))
    report = validate_datum(out, tol)
    if not report.is_valid:
        raise InternalError(
            f"restriction to a critical subspace failed validation (defect {report.defect:.3e})"
        )
    return out
