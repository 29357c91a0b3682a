import numpy as np
import pytest

from oudesign.asymptotic import fim_asymptotic
from oudesign.efficiency import (
    cross_term_diagnostic,
    criterion_value,
    efficiency_ratio,
    efficiency_table,
    ultimate_efficiency,
)
from oudesign.exceptions import CriterionDegenerateError, ValidationError
from oudesign.models import Criterion, InfoMatrix, SamplingDesign, SubvectorSelection
from oudesign.registry import make_builtin_model


def _gompertz(rho, delta, gamma):
    return make_builtin_model("gompertz_log", {"rho": rho, "delta": delta, "gamma": gamma, "Y0": 1.0})


def test_criterion_values_on_diagonal():
    M = np.diag([4.0, 1.0])
    assert criterion_value(M, "D") == pytest.approx(2.0)
    assert criterion_value(M, "E") == pytest.approx(1.0)
    assert criterion_value(M, "A") == pytest.approx(1.6)


def test_criterion_values_identity_and_singular():
    for c in Criterion:
        assert criterion_value(np.eye(3), c) == pytest.approx(1.0)
        assert criterion_value(np.diag([2.0, 0.0]), c) == 0.0


def test_nearly_singular_matrix_scores_zero_on_every_criterion():
    M = np.diag([1.0, 1e-14])
    for c in Criterion:
        assert criterion_value(M, c) == 0.0
    assert criterion_value(np.diag([1.0, 1e-6]), Criterion.E) == pytest.approx(1e-6)


def test_criterion_rejects_asymmetric():
    with pytest.raises(ValidationError):
        criterion_value(np.array([[1.0, 2.0], [0.0, 1.0]]), Criterion.D)


def test_criterion_homogeneity():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(3, 3))
    M = A @ A.T + 0.1 * np.eye(3)
    for c in Criterion:
        assert criterion_value(7.5 * M, c) == pytest.approx(7.5 * criterion_value(M, c), rel=1e-12)


def test_efficiency_ratio_scale_invariant():
    M = InfoMatrix(np.array([[2.0, 0.3], [0.3, 1.0]]), ("a", "b"))
    L = InfoMatrix(np.array([[3.0, 0.2], [0.2, 2.0]]), ("a", "b"))
    for c in Criterion:
        assert efficiency_ratio(M.scaled(4.0), L.scaled(4.0), c) == pytest.approx(efficiency_ratio(M, L, c), rel=1e-9)
        assert efficiency_ratio(L, L, c) == pytest.approx(1.0)


def test_zero_denominator():
    with pytest.raises(CriterionDegenerateError):
        efficiency_ratio(np.eye(2), np.diag([1.0, 0.0]), "E")


def test_ultimate_efficiency_in_unit_interval(domain):
    for params in [(1, 1, 1), (3, 1, 1), (1, 3, 1), (1, 1, 3)]:
        model = _gompertz(*params)
        sel = SubvectorSelection.complete(model.partition, ("rho", "delta"))
        rows = efficiency_table(model, None, domain, list(range(2, 31)), list(Criterion), sel)
        for row in rows:
            assert 0.0 <= row.ueff <= 1.0 + 1e-8


def test_efficiency_nondecreasing_along_nested_refinements(domain):
    model = _gompertz(1.0, 1.0, 1.0)
    sel = SubvectorSelection.complete(model.partition, ("rho", "delta"))
    asymptotic = fim_asymptotic(model, None, domain)
    for c in Criterion:
        values = [
            ultimate_efficiency(model, None, SamplingDesign.equidistant(domain, n), sel, c, asymptotic)
            for n in (2, 3, 5, 9, 17)
        ]
        assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))


def test_volatile_growth_five_trials_fall_just_short_of_eighty_percent(domain):
    model = _gompertz(1.0, 1.0, 3.0)
    sel = SubvectorSelection.complete(model.partition, ("rho", "delta"))
    five = SamplingDesign.equidistant(domain, 5)
    assert ultimate_efficiency(model, None, five, sel, Criterion.E) == pytest.approx(0.7976070562, abs=1e-6)
    # without the 1/2 on the log-variance term of X(T_lo) the limit is larger
    unhalved = fim_asymptotic(model, None, domain, log_variance_weight=1.0)
    assert ultimate_efficiency(model, None, five, sel, Criterion.E, unhalved) == pytest.approx(0.688, abs=2e-3)
    six = SamplingDesign.equidistant(domain, 6)
    assert ultimate_efficiency(model, None, six, sel, Criterion.E) == pytest.approx(0.841, abs=2e-3)


def test_fast_decay_efficiency_slightly_above_seventy_percent(domain):
    model = _gompertz(1.0, 3.0, 1.0)
    sel = SubvectorSelection.complete(model.partition, ("rho", "delta"))
    design = SamplingDesign.equidistant(domain, 15)
    assert 0.70 < ultimate_efficiency(model, None, design, sel, Criterion.E) < 0.75


def test_efficiency_table_order(gompertz, domain):
    sel = SubvectorSelection.complete(gompertz.partition, ("rho", "delta"))
    rows = efficiency_table(gompertz, None, domain, [3, 2], ["D", "A"], sel)
    assert [(r.n, r.criterion) for r in rows] == [(3, Criterion.D), (3, Criterion.A), (2, Criterion.D), (2, Criterion.A)]


def test_cross_term_vanishes(gompertz, domain):
    sel = SubvectorSelection.complete(gompertz.partition, ("rho", "delta"))
    values = cross_term_diagnostic(gompertz, None, domain, sel, [4, 16, 64])
    assert values[0] > values[1] > values[2]


def test_cross_term_block_diagonal_model(brownian, domain):
    sel = SubvectorSelection.complete(brownian.partition, ("theta1",))
    values = cross_term_diagnostic(brownian, None, domain, sel, [2, 8])
    assert values == pytest.approx([0.0, 0.0], abs=1e-12)
    assert len(cross_term_diagnostic(brownian, None, domain, sel, [5])) == 1


def test_cross_term_ladder_must_increase(gompertz, domain):
    sel = SubvectorSelection.complete(gompertz.partition, ("rho", "delta"))
    with pytest.raises(ValidationError):
        cross_term_diagnostic(gompertz, None, domain, sel, [8, 4])
