import math

import pytest

from bisync.toytrans import (
    BACK,
    FWD,
    OutOfVocabularyError,
    ToyLanguageSpec,
    ToyScorer,
    make_toy_corpus,
    toy_translate,
)


@pytest.fixture(scope="module")
def spec():
    return ToyLanguageSpec(vocab_size=50, noise_eps=0.1, seed=3)


def test_dictionary_is_bijection(spec):
    assert sorted(spec.dictionary.values()) == sorted(spec.target_vocab)
    assert all(spec.inverse[spec.dictionary[s]] == s for s in spec.source_vocab)


def test_round_trip_is_identity(spec):
    for src, _ in make_toy_corpus(spec, 200, (1, 15), seed=5):
        assert toy_translate(spec, toy_translate(spec, src, FWD), BACK) == src


def test_forward_rule(spec):
    d = spec.dictionary
    assert toy_translate(spec, ["s0", "s1", "s2", "s3"]) == [d["s1"], d["s0"], d["s3"], d["s2"]]
    assert toy_translate(spec, ["s0", "s1", "s2"]) == [d["s1"], d["s0"], d["s2"]]


def test_zero_noise_sampling_is_exact():
    quiet = ToyLanguageSpec(noise_eps=0.0, seed=3)
    ref = ["t1", "t2", "t3", "t4", "t5"]
    assert toy_translate(quiet, ref, BACK, sampling=99) == toy_translate(quiet, ref, BACK)


def test_sampling_is_deterministic_and_local(spec):
    ref = [f"t{i % 50}" for i in range(40)]
    a = toy_translate(spec, ref, BACK, sampling=17)
    b = toy_translate(spec, ref, BACK, sampling=17)
    assert a == b
    exact = toy_translate(spec, ref, BACK)
    for got, want in zip(a, exact):
        assert got == want or got in spec.neighbours(want)


def test_perturbation_rate_matches_noise(spec):
    n_tokens = 100_000
    sent = [f"t{i % 50}" for i in range(100)]
    exact = toy_translate(spec, sent, BACK)
    changed = 0
    for seed in range(n_tokens // len(sent)):
        out = toy_translate(spec, sent, BACK, sampling=seed)
        changed += sum(a != b for a, b in zip(out, exact))
    p = spec.noise_eps
    sigma = math.sqrt(n_tokens * p * (1 - p))
    assert abs(changed - n_tokens * p) <= 2 * sigma


def test_neighbours_are_distinct(spec):
    for tok in ["t0", "t49", "s7"]:
        nb = spec.neighbours(tok)
        assert len(set(nb)) == 5 and tok not in nb


def test_oov_names_token(spec):
    with pytest.raises(OutOfVocabularyError, match="zz"):
        toy_translate(spec, ["s1", "zz"])


def test_corpus_contract(spec):
    assert make_toy_corpus(spec, 0) == []
    corpus = make_toy_corpus(spec, 300, (3, 9), seed=1)
    assert corpus == make_toy_corpus(spec, 300, (3, 9), seed=1)
    assert corpus != make_toy_corpus(spec, 300, (3, 9), seed=2)
    for src, ref in corpus:
        assert 3 <= len(src) <= 9
        assert ref == toy_translate(spec, src)
    lengths = {len(s) for s, _ in corpus}
    assert lengths == set(range(3, 10))


def test_distinct_corpus_has_no_repeats(spec):
    for src, _ in make_toy_corpus(spec, 100, (5, 12), seed=4, distinct=True):
        assert len(set(src)) == len(src)


def test_scorer_prefers_oracle(spec):
    scorer = ToyScorer(spec)
    src = ["s1", "s2", "s3"]
    target = toy_translate(spec, src)
    lp = scorer.log_probs(src, [[], target[:1], target])
    assert [scorer.vocab[i] for i in lp.argmax(axis=1)] == [target[0], target[1], scorer.eos]
    assert abs(math.fsum(math.exp(v) for v in lp[0]) - 1.0) < 1e-9
