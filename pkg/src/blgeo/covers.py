"""Uniform covers of [n] and the Bollobas-Thomason inequality with its dual.

An s-uniform cover is a multiset of nonempty proper subsets of [n]
hitting each element exactly s times.  Intersecting all sign patterns
of the cover sets induces a partition of [n] (the 1-uniform cover); the
coordinate subspaces of that partition are exactly the independent
subspaces of the datum the cover generates.

The primal inequality |K|^s <= prod |P_{sigma_i} K| is checked exactly
on voxel bodies (cell counts are integers, projections are sets of
integer tuples), and equality holds precisely when K is the direct sum
of its projections onto the induced partition blocks, which is decided
by exact cell-set comparison.  The dual inequality
|K|^s >= (prod |sigma_i|! / (n!)^s) prod |K cap E_{sigma_i}| runs on
V-polytopes with the origin strictly inside; volumes and coordinate
sections come from facet enumeration at n <= 4, and equality holds
precisely when K is the convex hull of its sections by the induced
partition subspaces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as iter_product

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from .errors import CapError, InputError, InternalError

COVER_ENUMERATION_CAP = 24
BODY_MAX_DIM = 4


@dataclass(frozen=True)
class UniformCover:
    """Cover of [n] = {1..n} by nonempty subsets, each element hit exactly s times.

    The full set [n] is allowed as a member (it contributes the whole
    space as one of the subspaces); empty sets are rejected.
    """

    n: int
    s: int
    sets: tuple  # of frozenset[int]

    def __post_init__(self):
        if self.n < 1:
            raise InputError("ground set must be nonempty")
        if self.s < 1:
            raise InputError("multiplicity s must be >= 1")
        sets = tuple(frozenset(int(j) for j in sigma) for sigma in self.sets)
        if not sets:
            raise InputError("cover needs at least one set")
        for sigma in sets:
            if not sigma:
                raise InputError("cover sets must be nonempty")
            if not sigma <= set(range(1, self.n + 1)):
                raise InputError(f"cover set {sorted(sigma)} is not a subset of [{self.n}]")
        object.__setattr__(self, "sets", sets)

    @property
    def k(self) -> int:
        return len(self.sets)

    def to_json(self) -> dict:
        return {"n": self.n, "s": self.s, "sets": [sorted(sigma) for sigma in self.sets]}

    @staticmethod
    def from_json(obj: dict) -> "UniformCover":
        try:
            return UniformCover(int(obj["n"]), int(obj["s"]),
                                tuple(tuple(sigma) for sigma in obj["sets"]))
        except (KeyError, TypeError) as exc:
            raise InputError(f"cover JSON needs 'n', 's', 'sets': {exc}") from exc


def validate_cover(c: UniformCover):
    """Exact multiplicity count; True iff every element is hit s times."""
    counts = [0] * c.n
    for sigma in c.sets:
        for j in sigma:
            counts[j - 1] += 1
    return all(m == c.s for m in counts), tuple(counts)


def induced_one_cover(c: UniformCover) -> tuple:
    """The partition of [n] formed by all nonempty sign-pattern intersections.

    Walks patterns depth-first on bitmasks, pruning empty intersections;
    the result is verified to be a partition exactly and returned sorted
    by minimum element.
    """
    if c.k > COVER_ENUMERATION_CAP:
        raise CapError("cover pattern enumeration", COVER_ENUMERATION_CAP, c.k)
    masks = []
    for sigma in c.sets:
        m = 0
        for j in sigma:
            m |= 1 << (j - 1)
        masks.append(m)
    universe = (1 << c.n) - 1
    blocks = set()

    def walk(i: int, cur: int):
        if cur == 0:
            return
        if i == len(masks):
            blocks.add(cur)
            return
        walk(i + 1, cur & masks[i])
        walk(i + 1, cur & (universe & ~masks[i]))

    walk(0, universe)
    out = []
    for m in blocks:
        out.append(frozenset(j + 1 for j in range(c.n) if m >> j & 1))
    total = sum(len(b) for b in out)
    union = frozenset().union(*out) if out else frozenset()
    if total != c.n or union != frozenset(range(1, c.n + 1)):
        raise InternalError("induced cover is not a partition of [n]")
    return tuple(sorted(out, key=min))


# ---------------------------------------------------------------------------
# voxel bodies and the primal inequality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VoxelBody:
    """Finite union of unit cells of the integer lattice in R^n, n <= 4."""

    n: int
    cells: frozenset  # of int tuples

    def __post_init__(self):
        if not (1 <= self.n <= BODY_MAX_DIM):
            raise CapError("voxel dimension", BODY_MAX_DIM, self.n)
        cells = frozenset(tuple(int(x) for x in cell) for cell in self.cells)
        if not cells:
            raise InputError("voxel body must be nonempty")
        for cell in cells:
            if len(cell) != self.n:
                raise InputError(f"cell {cell} does not have {self.n} coordinates")
        object.__setattr__(self, "cells", cells)

    def to_json(self) -> dict:
        return {"n": self.n, "cells": sorted(list(c) for c in self.cells)}

    @staticmethod
    def from_json(obj: dict) -> "VoxelBody":
        try:
            return VoxelBody(int(obj["n"]), frozenset(tuple(c) for c in obj["cells"]))
        except (KeyError, TypeError) as exc:
            raise InputError(f"voxel JSON needs 'n' and 'cells': {exc}") from exc


def _project_cells(cells, axes) -> frozenset:
    return frozenset(tuple(cell[a] for a in axes) for cell in cells)


@dataclass(frozen=True)
class BTCheckResult:
    lhs: int
    rhs: int
    holds: bool
    equality: bool
    induced_partition: tuple
    split_certificate: object  # per-block projections when equality holds

    def to_json(self) -> dict:
        cert = None
        if self.split_certificate is not None:
            cert = [
                {"block": sorted(block), "cells": sorted(list(c) for c in proj)}
                for block, proj in self.split_certificate
            ]
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "holds": self.holds,
            "equality": self.equality,
            "induced_partition": [sorted(b) for b in self.induced_partition],
            "split_certificate": cert,
        }


def bt_check(K: VoxelBody, c: UniformCover) -> BTCheckResult:
    """|K|^s against prod |P_{sigma_i} K| in exact integer arithmetic.

    Equality is decided structurally: rebuild the product body from the
    projections onto the induced partition blocks and compare cell sets.
    A numeric tie without a matching split (or vice versa) cannot happen
    for voxel bodies and is reported as an internal error.
    """
    ok, counts = validate_cover(c)
    if not ok:
        raise InputError(f"cover is not {c.s}-uniform (multiplicities {counts})")
    if K.n != c.n:
        raise InputError("body and cover dimensions differ")
    vol = len(K.cells)
    lhs = vol ** c.s
    rhs = 1
    for sigma in c.sets:
        rhs *= len(_project_cells(K.cells, [j - 1 for j in sorted(sigma)]))
    partition = induced_one_cover(c)
    blocks = [sorted(b) for b in partition]
    projections = [_project_cells(K.cells, [j - 1 for j in b]) for b in blocks]
    prod_size = 1
    for p in projections:
        prod_size *= len(p)
    equality = False
    if prod_size == vol:
        rebuilt = set()
        for combo in iter_product(*projections):
            cell = [0] * K.n
            for b, part in zip(blocks, combo):
                for pos, axis in enumerate(b):
                    cell[axis - 1] = part[pos]
            rebuilt.add(tuple(cell))
        equality = rebuilt == K.cells
    if equality != (lhs == rhs):
        raise InternalError("voxel equality certificate disagrees with the integer values")
    return BTCheckResult(
        lhs=lhs,
        rhs=rhs,
        holds=lhs <= rhs,
        equality=equality,
        induced_partition=partition,
        split_certificate=tuple(zip(partition, projections)) if equality else None,
    )


# ---------------------------------------------------------------------------
# polytopes and the dual inequality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointPolytope:
    """Convex hull of finitely many points in R^n, n <= 4."""

    n: int
    vertices: tuple  # of coordinate tuples

    def __post_init__(self):
        if not (1 <= self.n <= BODY_MAX_DIM):
            raise CapError("polytope dimension", BODY_MAX_DIM, self.n)
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != self.n or V.shape[0] < self.n + 1:
            raise InputError(f"need at least {self.n + 1} vertices of dimension {self.n}")
        object.__setattr__(self, "vertices", tuple(tuple(map(float, v)) for v in V))

    def points(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    def to_json(self) -> dict:
        return {"n": self.n, "vertices": [list(v) for v in self.vertices]}

    @staticmethod
    def from_json(obj: dict) -> "PointPolytope":
        try:
            return PointPolytope(int(obj["n"]), tuple(tuple(v) for v in obj["vertices"]))
        except (KeyError, TypeError) as exc:
            raise InputError(f"polytope JSON needs 'n' and 'vertices': {exc}") from exc


def _hull_volume(points: np.ndarray) -> float:
    """Volume of conv(points) in its own dimension (0 for degenerate input)."""
    dim = points.shape[1]
    if dim == 1:
        return float(points.max() - points.min())
    try:
        return float(ConvexHull(points).volume)
    except QhullError:
        return 0.0


def _facets(points: np.ndarray):
    """Facet inequalities a.x <= b of the hull, derived from the vertices."""
    hull = ConvexHull(points)
    A = hull.equations[:, :-1]
    b = -hull.equations[:, -1]
    return A, b


def _origin_interior(A: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(np.all(b > tol * np.maximum(1.0, np.linalg.norm(A, axis=1))))


def _section_vertices(A: np.ndarray, b: np.ndarray, axes) -> np.ndarray:
    """Vertices of {x : A x <= b} cap the coordinate subspace of `axes`.

    Substituting zero for the other coordinates leaves an H-polytope in
    the section coordinates with the origin still interior; its vertices
    come from halfspace intersection (interval endpoints in dimension 1).
    """
    Asub = A[:, axes]
    keep = np.linalg.norm(Asub, axis=1) > 1e-12
    Asub, bsub = Asub[keep], b[keep]
    d = len(axes)
    if d == 1:
        a = Asub[:, 0]
        ub = np.min(bsub[a > 1e-12] / a[a > 1e-12])
        lb = np.max(bsub[a < -1e-12] / a[a < -1e-12])
        return np.array([[lb], [ub]])
    hs = np.column_stack([Asub, -bsub])
    inter = HalfspaceIntersection(hs, np.zeros(d))
    return inter.intersections


def _embed(points: np.ndarray, axes, n: int) -> np.ndarray:
    out = np.zeros((points.shape[0], n))
    out[:, axes] = points
    return out


@dataclass(frozen=True)
class DualBTCheckResult:
    lhs: float
    rhs: float
    factor: float        # prod |sigma_i|! / (n!)^s
    section_volumes: tuple
    holds: bool
    equality: bool
    conv_certificate: object  # per-block section vertices when equality holds
    mc_volume: object         # optional Monte Carlo cross-check of |K|

    def to_json(self) -> dict:
        cert = None
        if self.conv_certificate is not None:
            cert = [
                {"block": sorted(block), "vertices": [list(map(float, v)) for v in verts]}
                for block, verts in self.conv_certificate
            ]
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "factor": self.factor,
            "section_volumes": list(self.section_volumes),
            "holds": self.holds,
            "equality": self.equality,
            "conv_certificate": cert,
            "mc_volume": self.mc_volume,
        }


def dual_bt_check(K: PointPolytope, c: UniformCover, mc_samples: int = 0,
                  rng=None, rel_tol: float = 1e-9) -> DualBTCheckResult:
    """|K|^s against (prod |sigma_i|!/(n!)^s) prod |K cap E_{sigma_i}|.

    Requires the origin strictly inside K.  Equality is decided by
    rebuilding conv of the sections over the induced partition and
    comparing volumes to relative 1e-9 (the hull of sections is always
    contained in K, so volume equality is set equality).  mc_samples > 0
    adds a Monte Carlo estimate of |K| as a sanity figure; it never
    affects the verdict.
    """
    ok, counts = validate_cover(c)
    if not ok:
        raise InputError(f"cover is not {c.s}-uniform (multiplicities {counts})")
    if K.n != c.n:
        raise InputError("polytope and cover dimensions differ")
    pts = K.points()
    if np.linalg.matrix_rank(pts - pts[0], tol=1e-9) < K.n:
        raise InputError("polytope must affinely span R^n")
    A, b = _facets(pts)
    if not _origin_interior(A, b):
        raise InputError("the origin must lie strictly inside the polytope")

    vol = _hull_volume(pts)
    lhs = vol ** c.s
    factor = 1.0
    for sigma in c.sets:
        factor *= math.factorial(len(sigma))
    factor /= math.factorial(K.n) ** c.s
    section_vols = []
    for sigma in c.sets:
        axes = [j - 1 for j in sorted(sigma)]
        section_vols.append(_hull_volume(_section_vertices(A, b, axes)))
    rhs = factor * float(np.prod(section_vols))
    holds = lhs >= rhs * (1.0 - rel_tol)

    partition = induced_one_cover(c)
    cert = []
    all_pts = []
    for block in partition:
        axes = [j - 1 for j in sorted(block)]
        verts = _section_vertices(A, b, axes)
        emb = _embed(verts, axes, K.n)
        cert.append((block, emb))
        all_pts.append(emb)
    hull_of_sections = _hull_volume(np.concatenate(all_pts))
    equality = abs(hull_of_sections - vol) <= rel_tol * max(vol, 1e-300)

    mc_volume = None
    if mc_samples > 0:
        if rng is None:
            rng = np.random.default_rng(0)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        samples = rng.uniform(lo, hi, size=(mc_samples, K.n))
        inside = np.all(samples @ A.T <= b[None, :] + 1e-12, axis=1)
        mc_volume = float(np.prod(hi - lo) * inside.mean())

    return DualBTCheckResult(
        lhs=float(lhs),
        rhs=float(rhs),
        factor=float(factor),
        section_volumes=tuple(float(v) for v in section_vols),
        holds=bool(holds),
        equality=bool(equality),
        conv_certificate=tuple(cert) if equality else None,
        mc_volume=mc_volume,
    )
