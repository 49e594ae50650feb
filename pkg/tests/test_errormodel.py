import numpy as np
import pytest

from spotlab.errormodel import ErrorBudget, combine_shift_sigma, measured
from spotlab.errors import DomainError


def test_budget_defaults():
    b = ErrorBudget()
    assert b.sigma_absolute == 60e6
    assert b.sigma_relative == 20e6
    assert b.alignment_slope == 15e6
    assert b.resolution_floor == 10e6


def test_zeroed_budget_is_identity():
    b = ErrorBudget(0.0, 0.0, 0.0, 0.0)
    assert measured(751.52665e12, b, "absolute", 0.0, seed=4) == 751.52665e12


def test_misalignment_systematic_offset():
    b = ErrorBudget(sigma_absolute=0.0, sigma_relative=0.0)
    f = measured(1e15, b, "absolute", misalignment_deg=1.0, seed=0)
    assert f - 1e15 == pytest.approx(15e6)


def test_noise_sigma_converges():
    b = ErrorBudget()
    draws = np.array(
        [measured(0.0, b, "absolute", 0.0, seed=s) for s in range(10_000)]
    )
    assert draws.std() == pytest.approx(60e6, rel=0.03)


def test_relative_kind_uses_relative_sigma():
    b = ErrorBudget()
    draws = np.array(
        [measured(0.0, b, "relative", 0.0, seed=s) for s in range(5_000)]
    )
    assert draws.std() == pytest.approx(20e6, rel=0.05)


def test_unknown_kind_rejected():
    with pytest.raises(DomainError):
        measured(1e15, ErrorBudget(), "typical", 0.0, 0)


def test_negative_misalignment_rejected():
    with pytest.raises(DomainError):
        measured(1e15, ErrorBudget(), "absolute", -1.0, 0)


def test_combine_shift_sigma_classes():
    b = ErrorBudget()
    assert combine_shift_sigma(True, True, b) == 30e6
    assert combine_shift_sigma(False, True, b) == 60e6
    assert combine_shift_sigma(True, False, b) == 60e6
    assert combine_shift_sigma(False, False, b) == 60e6
    assert combine_shift_sigma(True, True, b, same_line=True) == 0.0


def test_negative_budget_rejected():
    with pytest.raises(DomainError):
        ErrorBudget(sigma_absolute=-1.0)
