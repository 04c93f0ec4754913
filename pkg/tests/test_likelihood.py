import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from dprh.baselines import InverseWeibull
from dprh.likelihood import (
    CensoredData,
    CensoredPair,
    DataError,
    censored_log_likelihood,
    classify,
    complete_log_likelihood,
    complete_mle_closed_form,
    contributions,
    contributions_by_set,
    params_with,
    read_csv,
    write_csv,
)
from dprh.model import DprhParams, joint_cdf, joint_pdf, log_joint_cdf, partial_cdf
from dprh.sampling import generate_sample

from oracles import QUAD, params_for_case

IW = InverseWeibull(alpha=1.3)
P = DprhParams(1.5, 1.5, 1.7, 1.8, IW)


@pytest.mark.parametrize(
    "pair, expected",
    [
        ((3, 1, 1, 1), 1), ((1, 3, 1, 1), 2), ((3, 1, 1, 0), 3), ((1, 3, 0, 1), 4),
        ((1, 3, 1, 0), 5), ((3, 1, 0, 1), 6), ((3, 1, 0, 0), 7), ((1, 3, 0, 0), 8),
    ],
)
def test_classify_table(pair, expected):
    assert classify(CensoredPair(*pair)) == expected


def test_ties():
    with pytest.raises(DataError):
        CensoredPair(2.0, 2.0, 1, 1)
    assert classify(CensoredPair(2.0, 2.0, 0, 0)) == 7
    assert classify(CensoredPair(2.0, 2.0, 1, 0)) == 3
    assert classify(CensoredPair(2.0, 2.0, 0, 1)) == 4


def test_sets_partition_sample():
    d = generate_sample(1.5, 1.7, 1.8, 1.3, 2000, 0.2, seed=1)
    counts = d.set_counts()
    assert sum(counts.values()) == len(d)
    assert all(counts[k] > 0 for k in range(1, 9))
    cf = d.censored_fraction
    assert abs(cf[0] - 0.2) < 0.03 and abs(cf[1] - 0.2) < 0.03


def test_flipping_flags_leaves_other_pairs_alone():
    d = generate_sample(1.5, 1.7, 1.8, 1.3, 200, 0.1, seed=2)
    d1 = d.d1.copy()
    d1[:20] = 0
    e = CensoredData(d.t1, d.t2, d1, d.d2)
    np.testing.assert_array_equal(e.set_id[20:], d.set_id[20:])


def test_zero_censoring_equals_complete_loglik():
    rng = np.random.default_rng(3)
    for _ in range(5):
        p = params_for_case(rng, 1)
        d = generate_sample(1.3, 1.6, 1.1, 1.4, 300, 0.0, seed=int(rng.integers(1e9)))
        assert set(d.set_counts()) >= {1, 2}
        assert censored_log_likelihood(p, d) == pytest.approx(complete_log_likelihood(p, d.t1, d.t2), abs=1e-10 * len(d))


def test_contribution_per_set_matches_model_functions():
    pairs = [
        (3.0, 1.0, 1, 1), (1.0, 3.0, 1, 1), (3.0, 1.0, 1, 0), (1.0, 3.0, 0, 1),
        (1.0, 3.0, 1, 0), (3.0, 1.0, 0, 1), (3.0, 1.0, 0, 0), (1.0, 3.0, 0, 0),
    ]
    d = CensoredData(*zip(*[(a, b, c, e) for a, b, c, e in pairs]))
    c = contributions(P, d)
    expected = [
        math.log(joint_pdf(P, 3, 1)), math.log(joint_pdf(P, 1, 3)),
        math.log(partial_cdf(P, 3, 1, 1)), math.log(partial_cdf(P, 1, 3, 2)),
        math.log(partial_cdf(P, 1, 3, 1)), math.log(partial_cdf(P, 3, 1, 2)),
        float(log_joint_cdf(P, 3, 1)), float(log_joint_cdf(P, 1, 3)),
    ]
    np.testing.assert_allclose(c, expected, rtol=1e-12)
    assert c[6] == pytest.approx(math.log(joint_cdf(P, 3, 1)), abs=1e-10)


def test_product_of_contributions():
    d = CensoredData([2.0, 0.7, 1.5], [1.1, 3.0, 0.4], [1, 0, 0], [1, 1, 0])
    prod = joint_pdf(P, 2.0, 1.1) * partial_cdf(P, 0.7, 3.0, 2) * joint_cdf(P, 1.5, 0.4)
    assert math.exp(censored_log_likelihood(P, d)) == pytest.approx(prod, rel=1e-12)


def test_fast_path_matches_reference():
    rng = np.random.default_rng(4)
    for case in (1, 2, 3, 4):
        p = params_for_case(rng, case)
        d = generate_sample(1.4, 1.2, 1.9, 1.1, 400, 0.25, seed=int(rng.integers(1e9)))
        np.testing.assert_allclose(contributions(p, d), contributions_by_set(p, d), rtol=1e-12, atol=1e-12)


def test_set5_contribution_integrates_to_diagonal_cdf():
    """Integrating dF/dy1 over y1 < c2 gives P(Y1 <= c2, Y2 <= c2) = F(c2, c2)."""
    rng = np.random.default_rng(5)
    for _ in range(10):
        p = params_for_case(rng, int(rng.integers(1, 5)))
        c2 = float(rng.uniform(0.5, 4))
        f5 = lambda u: math.exp(contributions(p, CensoredData([u], [c2], [1], [0]))[0])  # noqa: E731
        val = integrate.quad(f5, 1e-9, c2 * (1 - 1e-12), **QUAD)[0]
        assert val == pytest.approx(joint_cdf(p, c2, c2), abs=1e-4)


def test_degenerate_band_is_continuous():
    d = generate_sample(1.5, 1.7, 1.8, 1.3, 300, 0.2, seed=6)
    T = 3.0
    vals = [censored_log_likelihood(DprhParams(1.5, 1.5, T + s, 1.8, IW), d) for s in (-1e-7, 0.0, 1e-7)]
    assert abs(vals[0] - vals[1]) < 1e-4 and abs(vals[2] - vals[1]) < 1e-4


def test_invalid_values_give_minus_inf():
    d = CensoredData([-1.0, 2.0], [1.0, 0.5], [1, 1], [1, 1])
    assert censored_log_likelihood(P, d) == -math.inf


def test_closed_form_mle():
    d = generate_sample(1.5, 1.7, 1.8, 1.3, 5000, 0.0, seed=7)
    est = complete_mle_closed_form(d, IW)
    assert np.allclose(est, (1.5, 1.5, 1.7, 1.8), atol=0.1)
    # stationarity: the gradient of the complete log-likelihood vanishes at the closed form
    p = DprhParams(*est, IW)
    for name in ("theta1", "theta2", "theta1p", "theta2p"):
        h = 1e-6
        up = complete_log_likelihood(params_with(p, **{name: getattr(p, name) + h}), d.t1, d.t2)
        dn = complete_log_likelihood(params_with(p, **{name: getattr(p, name) - h}), d.t1, d.t2)
        assert abs((up - dn) / (2 * h)) < 1e-4 * len(d) ** 0.5


def test_closed_form_needs_both_orderings():
    y = np.array([[2.0, 1.0], [3.0, 0.5], [4.0, 2.0]])
    with pytest.raises(DataError):
        complete_mle_closed_form(y, IW)
    with pytest.raises(DataError):
        complete_mle_closed_form(CensoredData([1, 2], [2, 1], [1, 0], [1, 1]), IW)


def test_csv_round_trip(tmp_path):
    d = generate_sample(1.5, 1.7, 1.8, 1.3, 50, 0.2, seed=8)
    path = tmp_path / "d.csv"
    write_csv(d, path)
    assert path.read_text().splitlines()[0] == "t1,d1,t2,d2"
    assert read_csv(path) == d


def test_csv_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("t1,d1,t2,d2\n1.0,1,2.0,1\nx,1,2,1\n1,3,2,0\n")
    with pytest.raises(DataError, match="line 3.*line 4"):
        read_csv(bad)
    empty = tmp_path / "empty.csv"
    empty.write_text("t1,d1,t2,d2\n")
    with pytest.raises(DataError, match="no observations"):
        read_csv(empty)
    missing = tmp_path / "m.csv"
    missing.write_text("t1,t2\n1,2\n")
    with pytest.raises(DataError, match="missing"):
        read_csv(missing)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0.1, 10), st.floats(0.1, 10), st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=30)
)
def test_loglik_is_finite_or_minus_inf_and_consistent(rows):
    rows = [r for r in rows if not (r[0] == r[1] and r[2] == r[3] == 1)]
    if not rows:
        return
    d = CensoredData(*zip(*rows))
    v = censored_log_likelihood(P, d)
    assert v < math.inf
    np.testing.assert_allclose(contributions(P, d), contributions_by_set(P, d), rtol=1e-11, atol=1e-11)
