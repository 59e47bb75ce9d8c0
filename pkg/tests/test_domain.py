import numpy as np
import pytest

from src.core.domain import (
    MAX_LOSS_DB, NUM_PATHS, Dataset, GnbType, LinkCondition, LinkRecord, LinkState, PathEntry, PathSet,
    angles_from_direction, derive_link_state, direction_from_angles, filter_by_type, sort_present_first,
    validate_record, wrap_angle_deg,
)
from src.core.errors import EmptyDatasetError, InvalidConditionError


def nlos_entry(loss=120.0, delay=1e-6):
    return PathEntry(loss, 10.0, 80.0, -170.0, 100.0, delay)


def test_pathset_must_have_twenty_entries():
    with pytest.raises(ValueError):
        PathSet((PathEntry.absent(),) * 3)


def test_empty_pathset_is_nolink():
    paths = PathSet.empty()
    assert len(paths) == 0
    assert derive_link_state(paths) == LinkState.NO_LINK
    assert np.all(paths.to_array()[:, 0] == MAX_LOSS_DB)


def test_state_derivation():
    los = PathSet.from_present([PathEntry(80.0, is_los=True), nlos_entry()])
    nlos = PathSet.from_present([nlos_entry()])
    assert derive_link_state(los) == LinkState.LOS
    assert derive_link_state(nlos) == LinkState.NLOS


def test_from_array_marks_los_only_at_index_zero():
    arr = PathSet.from_present([nlos_entry(90.0), nlos_entry(110.0)]).to_array()
    paths = PathSet.from_array(arr, los_flag=True)
    assert paths.entries[0].is_los
    assert not paths.entries[1].is_los
    assert len(paths) == 2


def test_from_present_rejects_too_many_paths():
    with pytest.raises(ValueError):
        PathSet.from_present([nlos_entry()] * (NUM_PATHS + 1))


def test_sort_present_first_is_stable():
    a, b = nlos_entry(100.0), nlos_entry(130.0)
    entries = (PathEntry.absent(), a, PathEntry.absent(), b) + (PathEntry.absent(),) * (NUM_PATHS - 4)
    ordered = sort_present_first(PathSet(entries))
    assert ordered.entries[0] == a
    assert ordered.entries[1] == b
    assert not ordered.entries[2].is_present


@pytest.mark.parametrize("angle,expected", [
    (180.0, 180.0),
    (-180.0, 180.0),
    (190.0, -170.0),
    (-190.0, 170.0),
    (540.0, 180.0),
    (0.0, 0.0),
])
def test_wrap_angle(angle, expected):
    assert wrap_angle_deg(angle) == pytest.approx(expected)


def test_direction_angle_conversion_inverts():
    rng = np.random.default_rng(0)
    az = rng.uniform(-179.0, 179.0, 50)
    el = rng.uniform(1.0, 179.0, 50)
    back_az, back_el = angles_from_direction(direction_from_angles(az, el))
    np.testing.assert_allclose(back_az, az, atol=1e-9)
    np.testing.assert_allclose(back_el, el, atol=1e-9)


def test_condition_distances():
    u = LinkCondition(30.0, 40.0, 120.0, GnbType.DEDICATED)
    assert u.d2d_m == pytest.approx(50.0)
    assert u.d3d_m == pytest.approx(130.0)
    assert u.is_dedicated


def test_zero_displacement_rejected():
    with pytest.raises(InvalidConditionError):
        LinkCondition(0.0, 0.0, 0.0).require_nonzero()


def test_validate_record_accepts_valid_record():
    paths = PathSet.from_present([PathEntry(80.0, 0.0, 90.0, 180.0, 90.0, 3e-7, is_los=True), nlos_entry()])
    report = validate_record(LinkRecord("city", LinkCondition(100.0, 0.0, 0.0), paths))
    assert report == {'valid': True, 'findings': []}


def test_validate_record_lists_every_violation():
    entries = [nlos_entry(), PathEntry(90.0, 0.0, 90.0, 0.0, 90.0, -1e-9, is_los=True)]
    entries += [PathEntry.absent()] * (NUM_PATHS - 3) + [nlos_entry(150.0)]
    report = validate_record(LinkRecord("city", LinkCondition(0.0, 0.0, 0.0), PathSet(tuple(entries))))
    assert not report['valid']
    findings = " | ".join(report['findings'])
    assert "zero displacement" in findings
    assert "negative delay" in findings
    assert "LOS not at index 0" in findings
    assert "present path after absent path" in findings


def test_validate_record_flags_multiple_los_and_bad_angles():
    entries = [PathEntry(80.0, 0.0, 90.0, 0.0, 90.0, 1e-7, is_los=True),
               PathEntry(85.0, -180.0, 190.0, 0.0, 90.0, 1e-7, is_los=True)]
    report = validate_record(LinkRecord("city", LinkCondition(1.0, 1.0, 1.0), PathSet.from_present(entries)))
    findings = " | ".join(report['findings'])
    assert "multiple LOS paths" in findings
    assert "aoa azimuth out of range" in findings
    assert "aoa elevation out of range" in findings


def test_dataset_views_and_filter():
    records = (
        LinkRecord("city", LinkCondition(10.0, 0.0, 5.0, GnbType.STANDARD), PathSet.from_present([nlos_entry()])),
        LinkRecord("city", LinkCondition(0.0, 20.0, 5.0, GnbType.DEDICATED), PathSet.empty()),
    )
    data = Dataset(records)
    assert data.conditions.shape == (2, 3)
    assert data.path_arrays.shape == (2, NUM_PATHS, 6)
    assert list(data.states) == [LinkState.NLOS, LinkState.NO_LINK]
    assert list(data.dedicated) == [False, True]
    assert len(filter_by_type(data, GnbType.DEDICATED)) == 1


def test_empty_dataset_rejected():
    with pytest.raises(EmptyDatasetError):
        Dataset(())
    data = Dataset((LinkRecord("city", LinkCondition(1.0, 0.0, 0.0), PathSet.empty()),))
    with pytest.raises(EmptyDatasetError):
        filter_by_type(data, GnbType.DEDICATED)
