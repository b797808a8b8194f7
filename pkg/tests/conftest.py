import sys
import time
from dataclasses import dataclass
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bisync.editor_ar import mix_training_data  # noqa: E402
from bisync.editor_levt import LevtTrainConfig, train_levt  # noqa: E402
from bisync.seqmodel import ModelConfig, train  # noqa: E402
from bisync.synth import GeneratorConfig, NgramProposer, build_editing_corpus, build_method_set  # noqa: E402
from bisync.toytrans import BACK, FWD, ToyLanguageSpec, ToyTranslator, make_toy_corpus  # noqa: E402

# Desk-scale setup: 10k toy pairs give 10k editing + 10k parallel triplets.
N_TRAIN, N_TEST = 10_000, 300
LEN_RANGE = (4, 14)
AR_CONFIG = ModelConfig(epochs=12, lr=2e-3, warmup=500, batch_tokens=2048, dropout=0.1)
LEVT_CONFIG = ModelConfig(epochs=4, lr=2e-3, warmup=500, batch_tokens=2048, dropout=0.1)


@dataclass
class ToyWorld:
    spec: ToyLanguageSpec
    train_pairs: list
    test_pairs: list
    triplets: list
    back: ToyTranslator
    fwd: ToyTranslator
    proposer: NgramProposer

    def method_set(self, method, seed=99):
        return build_method_set(
            self.test_pairs, method, self.back, self.fwd, self.proposer, self.proposer, GeneratorConfig(seed=seed)
        )


@pytest.fixture(scope="session")
def toy_world():
    spec = ToyLanguageSpec(vocab_size=50, seed=0)
    pairs = make_toy_corpus(spec, N_TRAIN + N_TEST, LEN_RANGE, seed=1)
    train_pairs, test_pairs = pairs[:N_TRAIN], pairs[N_TRAIN:]
    back, fwd = ToyTranslator(spec, BACK), ToyTranslator(spec, FWD)
    proposer = NgramProposer([r for _, r in train_pairs])
    triplets, _ = build_editing_corpus(train_pairs, back, fwd, proposer, proposer, GeneratorConfig(seed=3))
    return ToyWorld(spec, train_pairs, test_pairs, triplets, back, fwd, proposer)


@pytest.fixture(scope="session")
def ar_model(toy_world):
    editing = [t for t in toy_world.triplets if t.tags is not None]
    parallel = [t for t in toy_world.triplets if t.tags is None]
    start = time.time()
    ckpt = train(mix_training_data(editing, parallel, seed=0), AR_CONFIG, "ar")
    ckpt.train_seconds = time.time() - start
    return ckpt


@pytest.fixture(scope="session")
def levt_model(toy_world):
    start = time.time()
    ckpt = train_levt(toy_world.triplets, LEVT_CONFIG, LevtTrainConfig(seed=0))
    ckpt.train_seconds = time.time() - start
    return ckpt


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """``criterion(name, ok, detail)`` prints one PASS/FAIL line and asserts."""

    def check(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
