import numpy as np
import pytest

from metastruct.losses import (DET_EPS, combined_gradient, combined_loss, dmi_gradient, dmi_loss,
                               joint_matrix, soft_iou_gradient, soft_iou_loss)
from metastruct.masks import MaskError
from oracles import central_difference, det2


def quarter_mask(n=16):
    s = np.zeros((n, n), dtype=np.uint8)
    s[: n // 2, : n // 2] = 1
    return s


def random_instance(rng, n=16):
    p = rng.uniform(0.05, 0.95, size=(n, n))
    s = (rng.random((n, n)) < p).astype(np.uint8)
    return p, s


def test_joint_matrix_perfect_agreement():
    s = quarter_mask()
    assert np.allclose(joint_matrix(s.astype(float), s), [[0.25, 0], [0, 0.75]])


def test_joint_matrix_by_summation(rng):
    p, s = random_instance(rng)
    q = np.zeros((2, 2))
    for pv, sv in zip(p.ravel(), s.ravel()):
        q += np.outer([pv, 1 - pv], [sv, 1 - sv])
    assert np.allclose(joint_matrix(p, s), q / p.size, atol=1e-15)


def test_joint_matrix_is_distribution(rng):
    for _ in range(20):
        p, s = random_instance(rng, 12)
        q = joint_matrix(p, s)
        assert np.all(q >= 0)
        assert abs(q.sum() - 1) <= 1e-12


def test_flat_prediction_is_singular():
    q = joint_matrix(np.full((8, 8), 0.5), quarter_mask(8))
    assert abs(det2(q)) < 1e-15
    assert dmi_loss(np.full((8, 8), 0.5), quarter_mask(8)) == pytest.approx(-np.log(DET_EPS))


def test_independent_inputs_near_singular():
    r = np.random.default_rng(5)
    p = r.random((256, 256))
    s = (r.random((256, 256)) < 0.5).astype(np.uint8)
    assert abs(det2(joint_matrix(p, s))) < 0.01


def test_dmi_value_quarter():
    s = quarter_mask()
    assert dmi_loss(s.astype(float), s) == pytest.approx(-np.log(0.1875), abs=1e-9)


def test_dmi_swap_invariant(rng):
    for _ in range(20):
        p, s = random_instance(rng)
        assert dmi_loss(p, s) == dmi_loss(p, 1 - s)
        assert np.allclose(dmi_gradient(p, s), dmi_gradient(p, 1 - s), rtol=1e-12, atol=0)


def max_rel_error(analytic, numeric):
    scale = np.maximum(np.abs(numeric), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / scale))


def test_dmi_gradient_finite_difference(rng):
    p, s = random_instance(rng)
    num = central_difference(lambda x: dmi_loss(x, s), p)
    assert max_rel_error(dmi_gradient(p, s), num) < 1e-4


def test_soft_iou_gradient_finite_difference(rng):
    p, s = random_instance(rng)
    num = central_difference(lambda x: soft_iou_loss(x, s), p)
    assert max_rel_error(soft_iou_gradient(p, s), num) < 1e-4


def test_combined(rng):
    p, s = random_instance(rng, 8)
    assert combined_loss(p, s) == pytest.approx(dmi_loss(p, s) + soft_iou_loss(p, s))
    num = central_difference(lambda x: combined_loss(x, s), p)
    assert max_rel_error(combined_gradient(p, s), num) < 1e-4


def test_dmi_gradient_sharpens_agreement():
    s = quarter_mask()
    p = np.where(s == 1, 0.8, 0.2)
    g = dmi_gradient(p, s)
    # descent raises p on foreground and lowers it on background
    assert np.all(g[s == 1] < 0) and np.all(g[s == 0] > 0)


def test_clamped_gradient_is_zero():
    assert np.all(dmi_gradient(np.full((6, 6), 0.3), quarter_mask(6)) == 0)


def test_selection_ignores_normalization(rng):
    p, _ = random_instance(rng, 20)
    cands = [(p > t).astype(np.uint8) for t in np.linspace(0.1, 0.9, 9)]
    n = p.size
    raw = [-np.log(max(abs(det2(joint_matrix(p, c) * n)), 1e-300)) for c in cands]
    norm = [dmi_loss(p, c) for c in cands]
    assert int(np.argmin(raw)) == int(np.argmin(norm))
    assert np.allclose(np.array(norm) - np.array(raw), 2 * np.log(n))


def test_soft_iou_values():
    s = quarter_mask()
    assert soft_iou_loss(s.astype(float), s) == pytest.approx(0.0, abs=1e-9)
    assert soft_iou_loss(np.zeros(s.shape), s) == pytest.approx(1.0, abs=1e-8)
    assert soft_iou_loss(0.5 * s, s) == pytest.approx(0.5, abs=1e-9)


def test_shape_mismatch():
    with pytest.raises(MaskError):
        dmi_loss(np.zeros((4, 4)), np.zeros((4, 5), dtype=np.uint8))


def test_probability_range_checked():
    with pytest.raises(MaskError):
        joint_matrix(np.full((3, 3), 1.5), np.zeros((3, 3), dtype=np.uint8))
