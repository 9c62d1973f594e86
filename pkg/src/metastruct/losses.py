"""DMI and soft-IoU losses between a probability map and a binary mask."""

import numpy as np

from metastruct.masks import as_binary, as_prob_image, same_shape

DET_EPS = 1e-12
IOU_EPS = 1e-7


def _pair(p, s):
    p = np.asarray(p, dtype=float)
    s = as_binary(s).astype(float)
    same_shape(p, s)
    return p.ravel(), s.ravel()


def joint_matrix(p, s) -> np.ndarray:
    """2x2 joint distribution of ``[P, 1-P]`` against ``[S, 1-S]``, divided by HW."""
    p, s = _pair(as_prob_image(p), s)
    P = np.stack([p, 1.0 - p])
    S = np.stack([s, 1.0 - s])
    return P @ S.T / p.size


def _det2(q: np.ndarray) -> float:
    return float(q[0, 0] * q[1, 1] - q[0, 1] * q[1, 0])


def dmi_loss(p, s, eps: float = DET_EPS) -> float:
    """``-ln |det Q|`` with ``|det Q|`` clamped below at ``eps``."""
    return -np.log(max(abs(_det2(joint_matrix(p, s))), eps))


def dmi_gradient(p, s, eps: float = DET_EPS) -> np.ndarray:
    """Analytic derivative of :func:`dmi_loss` with respect to each ``p(x)``.

    ``d det / d p(x) = (s(x) - mean(s)) / HW``, so the loss gradient is that
    divided by ``-det``. Zero wherever the determinant is clamped.
    """
    shape = np.shape(p)
    pf, sf = _pair(p, s)
    det = _det2(joint_matrix(p, s))
    if abs(det) <= eps:
        return np.zeros(shape)
    return (-(sf - sf.mean()) / (pf.size * det)).reshape(shape)


def soft_iou_loss(p, s, eps: float = IOU_EPS) -> float:
    pf, sf = _pair(p, s)
    inter = float(np.dot(pf, sf))
    union = float(np.sum(pf + sf - pf * sf))
    return 1.0 - (inter + eps) / (union + eps)


def soft_iou_gradient(p, s, eps: float = IOU_EPS) -> np.ndarray:
    shape = np.shape(p)
    pf, sf = _pair(p, s)
    inter = float(np.dot(pf, sf)) + eps
    union = float(np.sum(pf + sf - pf * sf)) + eps
    return (-(sf * union - inter * (1.0 - sf)) / union ** 2).reshape(shape)


def combined_loss(p, s) -> float:
    """Equal-weight sum of the DMI and soft-IoU losses."""
    return dmi_loss(p, s) + soft_iou_loss(p, s)


def combined_gradient(p, s) -> np.ndarray:
    return dmi_gradient(p, s) + soft_iou_gradient(p, s)
