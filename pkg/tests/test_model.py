"""Field masks and the content tree helpers.

The projection tests check FieldMask.project against an independent
leaf-path oracle: enumerate every leaf of the document, keep the leaves
covered by the mask, and rebuild the tree from scratch.
"""

import pytest

from consent_fabric.errors import InvalidArgument
from consent_fabric.model import (FieldMask, get_path, leaf_paths,
                                  set_path, split_path, validate_content)


def project_oracle(content, mask):
    out = {}
    for path in leaf_paths(content):
        if mask.covers(path):
            set_path(out, path, get_path(content, path))
    return out


DOC = {
    "name": "Asha",
    "grades": {"math": 91, "cs": 88, "lab": {"score": 7}},
    "year": 2024,
}


def test_full_mask_projects_everything():
    assert FieldMask.full().project(DOC) == DOC


def test_full_mask_is_full():
    assert FieldMask.full().is_full()
    assert not FieldMask.of(["name"]).is_full()


@pytest.mark.parametrize("paths", [
    ["name"],
    ["grades"],
    ["grades.math"],
    ["grades.lab", "year"],
    ["grades.math", "grades.cs"],
    ["missing"],
    ["grades.math", "missing.deeper"],
])
def test_projection_matches_leaf_oracle(paths):
    mask = FieldMask.of(paths)
    assert mask.project(DOC) == project_oracle(DOC, mask)


def test_covers_is_prefix_based():
    mask = FieldMask.of(["grades"])
    assert mask.covers("grades")
    assert mask.covers("grades.math")
    assert mask.covers("grades.lab.score")
    assert not mask.covers("name")
    assert not mask.covers("gradesx")


def test_intersect_keeps_deeper_path():
    a = FieldMask.of(["grades"])
    b = FieldMask.of(["grades.math", "name"])
    both = a.intersect(b)
    assert both.covers("grades.math")
    assert not both.covers("grades.cs")
    assert not both.covers("name")


def test_intersect_with_full_is_identity():
    m = FieldMask.of(["grades.lab"])
    assert FieldMask.full().intersect(m) == m
    assert m.intersect(FieldMask.full()) == m


def test_disjoint_intersection_covers_nothing():
    gone = FieldMask.of(["name"]).intersect(FieldMask.of(["year"]))
    assert gone.nothing
    assert not gone.covers("name")
    assert not gone.covers("year")
    assert gone.project(DOC) == {}


def test_nothing_mask_round_trips_through_json():
    gone = FieldMask.of(["name"]).intersect(FieldMask.of(["year"]))
    reborn = FieldMask.from_json(gone.to_json())
    assert reborn == gone
    assert reborn.nothing


def test_mask_json_round_trip():
    m = FieldMask.of(["grades.math", "name"])
    assert FieldMask.from_json(m.to_json()) == m


def test_split_path_rejects_bad_segments():
    with pytest.raises(InvalidArgument):
        split_path("")
    with pytest.raises(InvalidArgument):
        split_path("a..b")
    with pytest.raises(InvalidArgument):
        split_path("a b")


def test_validate_content_rejects_non_scalar_leaves():
    with pytest.raises(InvalidArgument):
        validate_content({"x": [1, 2]})
    with pytest.raises(InvalidArgument):
        validate_content({"bad key": 1})
    validate_content({"x": {"y": True, "z": 1.5}})


def test_set_path_builds_intermediates():
    doc = {}
    set_path(doc, "a.b.c", 5)
    assert doc == {"a": {"b": {"c": 5}}}
    set_path(doc, "a.b.c", 6)
    assert doc["a"]["b"]["c"] == 6


def test_get_path_and_leaves():
    assert get_path(DOC, "grades.lab.score") == 7
    assert sorted(leaf_paths(DOC)) == [
        "grades.cs", "grades.lab.score", "grades.math", "name", "year"]
