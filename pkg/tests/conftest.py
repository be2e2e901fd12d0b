import numpy as np
import pytest

from idmark.chaos import ChaoticParams, derive_key
from idmark.corpus import synth_corpus
from idmark.identity import fit_projection, synthesize_embeddings

# published cipher constants used throughout the tests
X0, R, P, Q = 0.1, 3.93, 5, 11

ACCEPTANCE_COUNT = 11
_acceptance: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    """Record one acceptance criterion outcome for the end-of-run summary."""

    def report(number: int, passed: bool, detail: str) -> bool:
        _acceptance[number] = (bool(passed), detail)
        return bool(passed)

    return report


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, ACCEPTANCE_COUNT + 1):
        if n in _acceptance:
            ok, detail = _acceptance[n]
            terminalreporter.write_line(f"AC{n:<2} {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"AC{n:<2} FAIL  not run")


def params(length: int, x0: float = X0, r: float = R) -> ChaoticParams:
    return ChaoticParams(x0=x0, r=r, p=P, q=Q, length=length)


@pytest.fixture(scope="session")
def corpus256():
    return synth_corpus(20, 256, seed=0)


@pytest.fixture(scope="session")
def corpus128():
    return synth_corpus(20, 128, seed=1)


@pytest.fixture(scope="session")
def people():
    return synthesize_embeddings(300, 512, samples_per_identity=2, seed=3)


@pytest.fixture(scope="session")
def model128(people):
    return fit_projection(people, 128)


@pytest.fixture(scope="session")
def key128():
    return derive_key(params(128))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
