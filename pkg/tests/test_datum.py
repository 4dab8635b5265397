import numpy as np
import pytest

from blgeo.covers import UniformCover
from blgeo.datum import (
    GeometricBLDatum,
    axis_datum,
    direct_sum_data,
    holder_datum,
    make_datum_from_cover,
    pair_data,
    paired_planes_datum,
    parse_weight,
    planar_lines_datum,
    random_datum,
    rank_one_expansion,
    rotate_datum,
    random_rotation,
    validate_datum,
)
from blgeo.errors import CapError, InputError
from blgeo.subspace import full_subspace, orthonormalize, projection_matrix


def test_axis_datum_validates_exactly():
    d = axis_datum(4)
    rep = validate_datum(d)
    assert rep.is_valid and rep.defect == 0.0 and rep.trace_defect == 0.0


def test_paired_planes_is_valid_datum():
    d = paired_planes_datum()
    rep = validate_datum(d)
    assert rep.is_valid
    assert rep.defect < 1e-12
    assert rep.entry_dims == (2, 2, 2)


def test_underweighted_entry_invalid():
    d = GeometricBLDatum(2, ((orthonormalize([[1, 0]]), 0.9),))
    rep = validate_datum(d)
    assert not rep.is_valid
    assert rep.defect >= 0.1
    with pytest.raises(InputError):
        rank_one_expansion(d)


def test_expansion_axis_datum():
    r = rank_one_expansion(axis_datum(3))
    assert r.k == 3
    assert np.allclose(np.abs(r.vectors), np.eye(3))
    assert np.allclose(r.weights, 1.0)
    assert r.gram_defect() < 1e-12


def test_expansion_paired_planes():
    d = paired_planes_datum()
    r = rank_one_expansion(d)
    assert r.k == 6
    assert np.allclose(r.weights, 2.0 / 3.0)
    assert r.gram_defect() < 1e-10
    assert float(r.weights.sum()) == pytest.approx(4.0, abs=1e-10)
    # each expansion vector spans the right entry plane
    for (i, j), u in zip(r.origin, r.vectors):
        E = d.entries[i][0]
        assert np.linalg.norm(projection_matrix(E) @ u - u) < 1e-9


def test_expansion_holder():
    d = holder_datum(2, [0.5, 0.5])
    r = rank_one_expansion(d)
    assert r.k == 4
    assert np.allclose(r.weights, 0.5)
    assert r.gram_defect() < 1e-12


def test_datum_from_loomis_whitney_cover():
    lw = UniformCover(3, 2, ({2, 3}, {1, 3}, {1, 2}))
    d = make_datum_from_cover(lw)
    assert validate_datum(d).defect == 0.0
    assert [E.dim for E, _ in d.entries] == [2, 2, 2]
    assert all(c == 0.5 for _, c in d.entries)


def test_datum_from_partition_cover():
    part = UniformCover(3, 1, ({1}, {2}, {3}))
    d = make_datum_from_cover(part)
    assert validate_datum(d).defect == 0.0
    assert [E.dim for E, _ in d.entries] == [1, 1, 1]


def test_datum_from_mixed_cover_direct_sum_oracle():
    c = UniformCover(3, 2, ({1, 2}, {3}, {1, 2, 3}))
    d = make_datum_from_cover(c)
    assert [E.dim for E, _ in d.entries] == [2, 1, 3]
    # oracle: direct matrix sum of the three coordinate projections
    P12 = np.diag([1.0, 1.0, 0.0])
    P3 = np.diag([0.0, 0.0, 1.0])
    assert np.abs(0.5 * (P12 + P3 + np.eye(3)) - np.eye(3)).max() == 0.0
    assert np.abs(d.weighted_projection_sum() - np.eye(3)).max() < 1e-15


def test_invalid_cover_rejected():
    bad = UniformCover(3, 2, ({1, 2}, {1, 3}))
    with pytest.raises(InputError):
        make_datum_from_cover(bad)


def test_weight_parsing():
    assert parse_weight("2/3") == pytest.approx(2.0 / 3.0, abs=1e-16)
    assert parse_weight("0.5") == 0.5
    with pytest.raises(InputError):
        parse_weight("-1")
    with pytest.raises(InputError):
        parse_weight("zebra")


def test_caps():
    with pytest.raises(CapError):
        GeometricBLDatum(33, ((full_subspace(33), 1.0),))
    with pytest.raises(CapError):
        holder_datum(1, [1.0 / 65] * 65)


def test_pairing_matches_paired_planes():
    a = planar_lines_datum(3)
    b = planar_lines_datum(3)
    merged = pair_data(a, b)
    ref = paired_planes_datum()
    assert merged.ambient_dim == 4
    assert validate_datum(merged).is_valid
    assert [E.dim for E, _ in merged.entries] == [E.dim for E, _ in ref.entries]


def test_rotation_preserves_validity(rng):
    d = paired_planes_datum()
    Q = random_rotation(rng, 4)
    rep = validate_datum(rotate_datum(d, Q))
    assert rep.is_valid and rep.defect < 1e-12


def test_random_generator_always_validates(rng):
    for _ in range(100):
        d = random_datum(rng)
        rep = validate_datum(d)
        assert rep.is_valid and rep.defect <= 1e-10
        assert rep.trace_defect <= 1e-10
        r = rank_one_expansion(d)
        assert r.gram_defect() < 1e-10
        assert r.k <= 12 and d.ambient_dim <= 6


def test_direct_sum_structure():
    d = direct_sum_data([axis_datum(2), planar_lines_datum(3)])
    assert d.ambient_dim == 4
    assert validate_datum(d).is_valid
    assert d.k == 5


def test_json_roundtrip():
    d = paired_planes_datum()
    d2 = GeometricBLDatum.from_json(d.to_json())
    rep = validate_datum(d2)
    assert rep.is_valid
    assert d2.k == d.k and d2.ambient_dim == d.ambient_dim


def test_json_accepts_rational_weight_strings():
    obj = {
        "n": 2,
        "entries": [
            {"c": "1/3", "E": {"n": 2, "frame": [[1.0, 0.0], [0.0, 1.0]]}},
            {"c": "2/3", "E": {"n": 2, "frame": [[1.0, 0.0], [0.0, 1.0]]}},
        ],
    }
    d = GeometricBLDatum.from_json(obj)
    rep = validate_datum(d)
    assert rep.is_valid and rep.defect < 1e-12
