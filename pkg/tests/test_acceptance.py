"""Acceptance criteria 1-11, each at its stated tolerance.

All criteria share one :class:`Runner` so scenario runs are computed once.
Criterion 2 (the 1e-4 wavelength ratio) is marked ``slow``.
"""

import pytest

from wavetraj import verify

from conftest import ACCEPTANCE_LINES


@pytest.fixture(scope="module")
def runner():
    return verify.Runner(workers=1)


def _check(runner, number):
    result = verify.CHECKS[number][1](runner)
    line = result.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert result.passed, line


def test_criterion_01_envelope(runner):
    _check(runner, 1)


@pytest.mark.slow
def test_criterion_02_small_ratio(runner):
    _check(runner, 2)


def test_criterion_03_constant_force(runner):
    _check(runner, 3)


def test_criterion_04_harmonic(runner):
    _check(runner, 4)


def test_criterion_05_barrier(runner):
    _check(runner, 5)


def test_criterion_06_step(runner):
    _check(runner, 6)


def test_criterion_07_lens(runner):
    _check(runner, 7)


def test_criterion_08_invariants(runner):
    _check(runner, 8)


def test_criterion_09_cross_regime(runner):
    _check(runner, 9)


def test_criterion_10_strict_projection(runner):
    _check(runner, 10)


def test_criterion_11_determinism(runner):
    _check(runner, 11)
