import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bisync.editdist import BUCKET_LABELS, OPCLASS_LABELS
from bisync.evalx import MISSING, bleu, stratified_report, ter_edits, translation_edit_rate

from oracles import ngram_counts

S = str.split


def test_identity_and_empty():
    refs = [S("a b c d e"), S("f g h i")]
    assert bleu(refs, refs) == pytest.approx(100.0, abs=1e-9)
    assert bleu([[], []], refs) == 0.0
    with pytest.raises(ValueError):
        bleu([[]], refs)


def test_three_sentence_fixture():
    hyps = [S("the cat sat on the mat"), S("a b c d"), S("x y")]
    refs = [S("the cat sat on a mat"), S("a b c d e"), S("x z")]
    # clipped matches / totals per order: 10/12, 6/9, 4/6, 2/4; lengths 12 vs 13
    expected = 100 * math.exp(1 - 13 / 12) * (10 / 12 * 6 / 9 * 4 / 6 * 2 / 4) ** 0.25
    assert bleu(hyps, refs) == pytest.approx(expected, abs=0.01)
    assert abs(bleu(hyps, refs) - 60.35) < 0.01


def test_exponential_smoothing():
    # orders 3 and 4 have no match: they get 1/(2*2) and 1/(4*1)
    expected = 100 * math.exp(1 - 5 / 4) * (1 * 2 / 3 * (1 / 4) * (1 / 4)) ** 0.25
    assert bleu([S("a b c d")], [S("a b x c d")]) == pytest.approx(expected, rel=1e-12)


def independent_bleu(hyps, refs):
    m = [0] * 4
    t = [0] * 4
    for h, r in zip(hyps, refs):
        for n in range(1, 5):
            hc, rc = ngram_counts(h, n), ngram_counts(r, n)
            m[n - 1] += sum(min(c, rc.get(g, 0)) for g, c in hc.items())
            t[n - 1] += sum(hc.values())
    hl, rl = sum(map(len, hyps)), sum(map(len, refs))
    if hl == 0:
        return 0.0
    logs, k = [], 0
    for mi, ti in zip(m, t):
        if ti == 0:
            break
        if mi == 0:
            k += 1
            logs.append(math.log(1 / (2**k * ti)))
        else:
            logs.append(math.log(mi / ti))
    bp = min(1.0, math.exp(1 - rl / hl))
    return 100 * bp * math.exp(sum(logs) / len(logs))


corpora = st.lists(
    st.tuples(st.lists(st.sampled_from("abcd"), max_size=9), st.lists(st.sampled_from("abcd"), min_size=1, max_size=9)),
    min_size=1,
    max_size=6,
)


@settings(max_examples=300, deadline=None)
@given(corpora)
def test_bleu_matches_independent_counter(pairs):
    hyps, refs = [h for h, _ in pairs], [r for _, r in pairs]
    assert bleu(hyps, refs) == pytest.approx(independent_bleu(hyps, refs), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(corpora, st.randoms(use_true_random=False))
def test_order_invariance(pairs, rnd):
    hyps, refs = [h for h, _ in pairs], [r for _, r in pairs]
    perm = list(range(len(pairs)))
    rnd.shuffle(perm)
    assert bleu([hyps[i] for i in perm], [refs[i] for i in perm]) == pytest.approx(bleu(hyps, refs), abs=1e-9)
    assert translation_edit_rate([hyps[i] for i in perm], [refs[i] for i in perm]) == pytest.approx(
        translation_edit_rate(hyps, refs)
    )


def test_ter_fixtures():
    assert translation_edit_rate([S("a b")], [S("a b")]) == 0.0
    assert translation_edit_rate([S("a")], [S("a b")]) == 0.5
    with pytest.raises(ValueError):
        translation_edit_rate([[]], [[]])
    with pytest.raises(ValueError):
        translation_edit_rate([S("a")], [])


def test_ter_extra_wrong_token_never_helps():
    rng = np.random.default_rng(0)
    for _ in range(300):
        ref = list(rng.choice(list("abcde"), size=rng.integers(1, 8)))
        hyp = list(rng.choice(list("abcde"), size=rng.integers(0, 8)))
        pos = int(rng.integers(len(hyp) + 1))
        worse = hyp[:pos] + ["zz"] + hyp[pos:]
        assert translation_edit_rate([worse], [ref]) >= translation_edit_rate([hyp], [ref])


def test_ter_shift_pass():
    ref = S("a b c d e f")
    hyp = S("d e f a b c")
    assert ter_edits(hyp, ref) == 6
    assert ter_edits(hyp, ref, shifts=True) == 1
    assert ter_edits(ref, ref, shifts=True) == 0


def test_short_sentences_use_available_orders():
    assert bleu([S("a b")], [S("a b")]) == 100.0
    assert bleu([S("a b")], [S("a c")]) == pytest.approx(100 * math.sqrt(0.5 * 0.5))


def test_bucket_report_shape_and_copy_row():
    refs = [S("a b c"), S("a b c d"), S("x y z w v u t s r q p o")]
    inits = [S("a b c"), S("a c d"), S("x")]
    hyps = [S("a b c"), S("a b c d"), S("x y")]
    rep = stratified_report(hyps, refs, inits, "bucket")
    assert rep.columns() == list(BUCKET_LABELS) == ["0", "1", "2", "3", "4", "5", "6", "7", "8-10", ">10"]
    assert rep.n_total == 3
    assert rep.row("0").copy_score == 100.0 and rep.row("0").n == 1
    assert rep.row(">10").n == 1 and rep.row("1").n == 1
    assert rep.row("5").score is None
    assert MISSING in rep.to_table() and rep.to_tsv().splitlines()[0].split("\t")[1] == "All"
    assert rep.overall == pytest.approx(bleu(hyps, refs))
    assert rep.copy_overall == pytest.approx(bleu(inits, refs))


def test_all_copies_single_stratum():
    refs = [S("a b c"), S("d e f g")]
    rep = stratified_report(refs, refs, refs, "bucket")
    assert [r.label for r in rep.rows if r.n] == ["0"]
    assert rep.row("0").copy_score == 100.0
    rep = stratified_report(refs, refs, refs, "opclass")
    assert rep.columns() == list(OPCLASS_LABELS)
    assert [r.label for r in rep.rows if r.n] == ["="]


def test_ter_report_copy_zero():
    refs = [S("a b c")]
    rep = stratified_report(refs, refs, refs, "bucket", metric="ter")
    assert rep.row("0").copy_score == 0.0
