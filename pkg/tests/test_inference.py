import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from abmgc.abm import BlockLayout, CoefficientTensor
from abmgc.core import DomainError
from abmgc.inference import (EffectTrace, GCMatrix, aggregate, binarize, binarize_trace,
                             effect_trace, interaction_durations, lower_median, signmax,
                             signed_extreme, threshold)


def _tensor(value, T=6, p=3, K=2, d=2):
    layout = BlockLayout(p, d, d)
    psi = np.broadcast_to(value, (T, p, K, d, layout.d_h)).astype(float).copy()
    return CoefficientTensor(psi, layout)


def test_signmax_examples():
    assert signmax([1, 2, -3]) == -1
    assert signmax([0.5, 2.0, 1.0]) == 1
    assert signmax([2, -2]) == 1 and signmax([-2, 2]) == 1
    assert signmax([0.0, 0.0]) == 0
    with pytest.raises(DomainError):
        signmax([])


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=30))
@settings(max_examples=200, deadline=None)
def test_signmax_follows_largest_magnitude(xs):
    top = max(xs, key=abs)
    if any(x == -top for x in xs) and top != 0:
        assert signmax(xs) == 1
    else:
        assert signmax(xs) == np.sign(top)


def test_signed_extreme_along_axis():
    np.testing.assert_array_equal(signed_extreme(np.array([[1, -5], [3, 2]]), axis=1), [-5, 3])


def test_lower_median_is_attained():
    np.testing.assert_array_equal(lower_median(np.array([[4, 1, 3, 2]]), axis=1), [2])
    np.testing.assert_array_equal(lower_median(np.array([[5, 1, 3]]), axis=1), [3])


def test_constant_tensor_aggregates_to_block_norm():
    gc = aggregate(_tensor(1.0))
    off = ~np.eye(3, dtype=bool)
    np.testing.assert_allclose(gc.magnitude[off], 2.0)
    assert np.all(gc.sign[off] == 1)
    np.testing.assert_allclose(gc.strengths[off], 2.0)
    assert np.all(np.diag(gc.strengths) == 0)


def test_negative_tensor_has_negative_sign():
    gc = aggregate(_tensor(-0.5))
    off = ~np.eye(3, dtype=bool)
    assert np.all(gc.sign[off] == -1)
    np.testing.assert_allclose(gc.strengths[off], -1.0)


def test_zero_tensor_has_zero_strength():
    assert np.all(aggregate(_tensor(0.0)).strengths == 0)


def test_aggregate_reads_the_right_block():
    t = _tensor(0.0, p=3)
    # agent 2's coefficients on agent 0 (source 0, target 2)
    t.psi[:, 2, :, :, t.layout.cols(2, 0)] = 3.0
    gc = aggregate(t)
    assert gc.magnitude[0, 2] == pytest.approx(6.0)
    assert gc.magnitude[2, 0] == 0.0


def test_aggregate_rejects_non_finite():
    t = _tensor(1.0)
    t.psi[0, 0, 0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        aggregate(t)


def test_half_maximum_binarization():
    mag = np.zeros((3, 3))
    mag[0, 1], mag[0, 2], mag[1, 0], mag[2, 1] = 4, 2, 1, 0.5
    gc = GCMatrix.from_parts(mag, np.ones((3, 3), int))
    assert threshold(mag) == 2.0
    kept = binarize(gc).edges
    assert {(i, j) for i, j in zip(*np.nonzero(kept))} == {(0, 1), (0, 2)}


def test_binarization_edge_cases():
    assert not binarize(GCMatrix.from_parts(np.zeros((3, 3)), np.zeros((3, 3), int))).edges.any()
    mag = np.array([[0.0, 1e-9], [0.0, 0.0]])
    assert binarize(GCMatrix.from_parts(mag, np.array([[0, -1], [0, 0]]))).edges[0, 1] == -1
    # a large diagonal value does not move the threshold
    mag = np.array([[100.0, 1.0], [0.6, 0.0]])
    assert binarize(GCMatrix.from_parts(mag, np.ones((2, 2), int))).edges.tolist() == [[0, 1], [1, 0]]


def test_constant_tensor_gives_constant_trace():
    t = _tensor(1.0)
    trace = effect_trace(t)
    gc = aggregate(t)
    off = ~np.eye(3, dtype=bool)
    for s in trace.s:
        np.testing.assert_allclose(s[off], gc.strengths[off])


def test_piecewise_trace():
    t = _tensor(0.0, T=10)
    t.psi[5:] = 1.0
    s = effect_trace(t).s
    assert np.all(s[:5] == 0)
    assert np.all(s[5:][:, ~np.eye(3, dtype=bool)] > 0)


def test_trace_normalisation():
    s = np.zeros((4, 2, 2))
    s[:, 0, 1] = [1.0, -4.0, 2.0, 0.0]
    np.testing.assert_allclose(EffectTrace(s).normalized()[:, 0, 1], [0.25, -1.0, 0.5, 0.0])


def test_per_frame_binarization_keeps_signs():
    s = np.zeros((3, 2, 2))
    s[:, 0, 1] = [2.0, -1.5, 0.5]
    np.testing.assert_array_equal(binarize_trace(EffectTrace(s))[:, 0, 1], [1, -1, 0])


def test_duration_counts_frames():
    s = np.zeros((90, 2, 2))
    s[:45, 0, 1] = 1.0
    s[45:60, 1, 0] = -1.0
    dur = interaction_durations(EffectTrace(s), fps=30.0)
    assert dur.attraction[0, 0, 1] == pytest.approx(1.5)
    assert dur.repulsion[0, 1, 0] == pytest.approx(0.5)
    assert dur.bin_seconds == 10.0


def test_durations_per_bin():
    s = np.ones((300, 2, 2))
    dur = interaction_durations(EffectTrace(s), fps=10.0, bin_seconds=10.0)
    assert dur.attraction.shape == (3, 2, 2)
    att, rep = dur.totals()
    np.testing.assert_allclose(att, [20.0, 20.0, 20.0])
    assert np.all(rep == 0)


def test_zero_trace_has_no_durations():
    dur = interaction_durations(EffectTrace(np.zeros((50, 3, 3))), fps=30.0)
    assert np.all(dur.attraction == 0) and np.all(dur.repulsion == 0)
    with pytest.raises(DomainError):
        interaction_durations(EffectTrace(np.zeros((5, 2, 2))), fps=0.0)
