import pytest

import bisync.clean as clean
from bisync.clean import (
    LabelMap,
    RelationLabel,
    clte_label_of_tags,
    edit_class_of_tags,
    run_cleaning,
    tags_of_clte_label,
)
from bisync.tags import EditTagSet


def test_edit_class_priority():
    assert edit_class_of_tags(EditTagSet()) == "Copy"
    assert edit_class_of_tags(EditTagSet(True, False, False)) == "Insertion"
    assert edit_class_of_tags(EditTagSet(True, False, True)) == "Deletion"
    assert edit_class_of_tags(EditTagSet(True, True, True)) == "Substitution"


@pytest.mark.parametrize("direction", ["EnFr", "FrEn"])
def test_label_map_is_a_bijection(direction):
    m = LabelMap(direction)
    assert set(m.to_class) == set(RelationLabel)
    assert sorted(m.to_class.values()) == sorted(["Copy", "Insertion", "Deletion", "Substitution"])
    for label in RelationLabel:
        assert clte_label_of_tags(tags_of_clte_label(label, m), m) == label


def test_directions_swap_forward_and_backward():
    ins = EditTagSet(True, False, False)
    assert clte_label_of_tags(ins, LabelMap("EnFr")) == RelationLabel.BACKWARD
    assert clte_label_of_tags(ins, LabelMap("FrEn")) == RelationLabel.FORWARD
    assert clte_label_of_tags(EditTagSet(), LabelMap("FrEn")) == RelationLabel.BIDIRECTIONAL
    with pytest.raises(ValueError):
        LabelMap("DeEn")


class FakeModel:
    """Stands in for a checkpoint: tags come from the target's first token."""


def fake_sync_batch(ckpt, items, mode, beam=1):
    out = []
    for src, tgt in items:
        if mode.kind == "classify":
            code = tgt[0] if tgt and len(tgt[0]) == 3 and set(tgt[0]) <= set("01") else "000"
            out.append((EditTagSet.from_code(code), []))
        else:
            # the fix keeps a marker telling whether it is accepted on re-classification
            out.append((mode.tags, ["000" if "good" in tgt else "111", "fixed"]))
    return out


@pytest.fixture
def corpus(monkeypatch):
    monkeypatch.setattr(clean, "sync_batch", fake_sync_batch)
    return [
        (["a"], ["000", "x"]),
        (["b"], ["100", "good"]),
        (["c"], ["010", "bad"]),
        (["d"], ["plain"]),
        (["e"], ["001", "good"]),
    ]


def test_filter_partition_is_exact(corpus):
    kept, report, tags = run_cleaning(FakeModel(), FakeModel(), corpus, "filter")
    assert kept == [corpus[0], corpus[3]]
    assert report.n_parallel == 2 and report.n_filtered == 3 and report.n_fixed == 0
    assert report.parallel_fraction == pytest.approx(0.4)
    assert [t.code() for t in tags] == ["000", "100", "010", "000", "001"]


def test_fix_keeps_every_pair(corpus):
    out, report, _ = run_cleaning(FakeModel(), FakeModel(), corpus, "fix")
    assert [s for s, _ in out] == [s for s, _ in corpus]
    assert out[1][1] == ["000", "fixed"] and out[0] == corpus[0]
    assert report.n_fixed == 3


def test_filter_and_fix_keeps_accepted_fixes(corpus):
    out, report, _ = run_cleaning(FakeModel(), FakeModel(), corpus, "filter_and_fix")
    assert [s[0] for s, _ in out] == ["a", "b", "d", "e"]
    assert report.n_fixed == 2
    assert report.to_json()["label_histogram"] == {"000": 2, "001": 1, "010": 1, "100": 1}


def test_unknown_policy(corpus):
    with pytest.raises(ValueError):
        run_cleaning(FakeModel(), FakeModel(), corpus, "burn")
