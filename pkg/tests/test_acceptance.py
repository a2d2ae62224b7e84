"""Exit criteria 1-10 at their stated sizes; one PASS/FAIL line each.

Run with ``pytest -m acceptance -s`` (about half an hour on one core).
"""

import pytest

from gmcf import acceptance as acc

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


def report(capsys, label, check):
    with capsys.disabled():
        print(f"\n[criterion {label}] {check.line()}")
    assert check.ok, check.line()


@pytest.fixture(scope="module")
def decay_run():
    return acc.decay_and_tightness()


def test_01_covariance_fidelity(capsys):
    report(capsys, 1, acc.covariance_fidelity())


def test_02_kernel_estimates(capsys):
    report(capsys, 2, acc.kernel_estimates())


def test_03_brownian_suite(capsys):
    report(capsys, 3, acc.brownian_suite())


def test_04_martingale_normalization(capsys):
    report(capsys, 4, acc.martingale_normalization())


def test_05_second_moment_oracle(capsys):
    report(capsys, 5, acc.second_moment_oracle())


def test_06_good_event_decay(capsys, decay_run):
    report(capsys, 6, decay_run[0])


def test_07_tightness_diagnostic(capsys, decay_run):
    report(capsys, 7, decay_run[1])


def test_08_two_point_bound(capsys):
    report(capsys, 8, acc.two_point_bound())


def test_09_conjecture_smoke(capsys):
    report(capsys, 9, acc.conjecture_smoke())


def test_10_determinism(capsys):
    report(capsys, 10, acc.determinism())
