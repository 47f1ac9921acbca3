"""Reference implementations of the detection training losses.

total = beta * box + objectness + classification, with beta = 0.1:

* box: squared error on centers plus squared error on the square roots of
  the sizes, averaged over positive (matched) cells;
* objectness: focal loss with gamma = 2, alpha 1.0 for positive and 0.01
  for negative cells, averaged over all cells;
* classification: softmax cross-entropy, averaged over positive cells.

All reductions are means so that beta keeps its meaning across batch sizes.
``head_loss`` evaluates the full loss directly on a raw head tensor (logits)
and ``head_loss_grad`` returns the exact analytic gradient with respect to
every logit, so external trainers can be checked against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BETA = 0.1
FOCAL_ALPHA_NEG = 0.01
FOCAL_ALPHA_POS = 1.0
FOCAL_GAMMA = 2.0
PROB_EPS = 1e-7


@dataclass(frozen=True)
class LossBreakdown:
    l_box: float
    l_obj: float
    l_class: float
    l_total: float
    beta: float = BETA
    focal_alpha_neg: float = FOCAL_ALPHA_NEG
    focal_gamma: float = FOCAL_GAMMA

    def __post_init__(self):
        if min(self.l_box, self.l_obj, self.l_class) < 0:
            raise ValueError("loss components must be non-negative")
        want = self.beta * self.l_box + self.l_obj + self.l_class
        if abs(self.l_total - want) > 1e-9 * max(1.0, abs(want)):
            raise ValueError("l_total is not the stated combination")

    def to_json(self) -> dict:
        return {"l_box": self.l_box, "l_obj": self.l_obj,
                "l_class": self.l_class, "l_total": self.l_total,
                "beta": self.beta}


def total_loss(l_box: float, l_obj: float, l_class: float,
               beta: float = BETA) -> LossBreakdown:
    """Combine the three components into the weighted total."""
    return LossBreakdown(float(l_box), float(l_obj), float(l_class),
                         beta * float(l_box) + float(l_obj) + float(l_class),
                         beta=beta)


def box_loss(pred_centers, pred_sizes, target_centers, target_sizes) -> float:
    """Center squared error plus sqrt-size squared error, mean over positives."""
    pc = np.atleast_2d(np.asarray(pred_centers, dtype=np.float64))
    ps = np.atleast_2d(np.asarray(pred_sizes, dtype=np.float64))
    tc = np.atleast_2d(np.asarray(target_centers, dtype=np.float64))
    ts = np.atleast_2d(np.asarray(target_sizes, dtype=np.float64))
    if np.any(ps < 0) or np.any(ts < 0):
        raise ValueError("box sizes must be non-negative")
    if len(pc) == 0:
        return 0.0
    per_box = ((pc - tc) ** 2).sum(axis=1) \
        + ((np.sqrt(ps) - np.sqrt(ts)) ** 2).sum(axis=1)
    return float(per_box.mean())


def focal_objectness_loss(probs, pos_mask, alpha_neg: float = FOCAL_ALPHA_NEG,
                          alpha_pos: float = FOCAL_ALPHA_POS,
                          gamma: float = FOCAL_GAMMA) -> float:
    """Focal loss on objectness probabilities, mean over all cells.

    Positives contribute -alpha_pos * (1-p)^gamma * ln(p), negatives
    -alpha_neg * p^gamma * ln(1-p). Probabilities are clamped to
    [1e-7, 1 - 1e-7] before the logs.
    """
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    pos = np.asarray(pos_mask, dtype=bool)
    if p.shape != pos.shape:
        raise ValueError("probs and pos_mask shapes differ")
    loss = np.where(pos,
                    -alpha_pos * (1.0 - p) ** gamma * np.log(p),
                    -alpha_neg * p ** gamma * np.log1p(-p))
    return float(loss.mean())


def class_loss(logits, class_ids) -> float:
    """Mean softmax cross-entropy at positive cells."""
    x = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    ids = np.atleast_1d(np.asarray(class_ids, dtype=np.int64))
    if len(x) == 0:
        return 0.0
    shifted = x - x.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    return float((log_z - shifted[np.arange(len(x)), ids]).mean())


def _gather(raw: np.ndarray, pos_idx: np.ndarray):
    return raw[tuple(pos_idx[:, i] for i in range(pos_idx.shape[1]))]


def _decoded_preds(raw, pos_idx, anchor_sizes, strides, origin, d):
    t = _gather(raw, pos_idx)
    sig = 1.0 / (1.0 + np.exp(-t[:, :d]))
    centers = (pos_idx[:, :d] + sig) * strides + origin
    sizes = anchor_sizes[pos_idx[:, d]] * np.exp(t[:, d:2 * d])
    return t, sig, centers, sizes


def head_loss(raw, pos_idx, target_centers, target_sizes, target_classes,
              anchor_sizes, strides, origin=None, beta: float = BETA,
              alpha_neg: float = FOCAL_ALPHA_NEG,
              alpha_pos: float = FOCAL_ALPHA_POS,
              gamma: float = FOCAL_GAMMA) -> LossBreakdown:
    """Full loss of a raw head tensor against matched targets.

    ``raw`` has shape (*grid, A, 2d+1+C) with channel order (center logits,
    size logits, objectness logit, class logits); ``pos_idx`` is a (P, d+1)
    array of (grid..., anchor) indices of the positive cells, and the target
    arrays give each positive's center (grid-axis order, decoded units),
    size and class id. Centers decode as (cell + sigmoid(t)) * stride +
    origin without doppler wrapping, i.e. cell-locally.
    """
    raw = np.asarray(raw, dtype=np.float64)
    strides = np.asarray(strides, dtype=np.float64)
    d = len(strides)
    origin = np.zeros(d) if origin is None else np.asarray(origin, dtype=np.float64)
    anchor_sizes = np.asarray(anchor_sizes, dtype=np.float64)
    pos_idx = np.atleast_2d(np.asarray(pos_idx, dtype=np.int64))

    if pos_idx.size:
        _, _, centers, sizes = _decoded_preds(raw, pos_idx, anchor_sizes,
                                              strides, origin, d)
        l_box = box_loss(centers, sizes, target_centers, target_sizes)
        l_class = class_loss(_gather(raw, pos_idx)[:, 2 * d + 1:], target_classes)
    else:
        l_box = 0.0
        l_class = 0.0

    pos_mask = np.zeros(raw.shape[:-1], dtype=bool)
    if pos_idx.size:
        pos_mask[tuple(pos_idx[:, i] for i in range(pos_idx.shape[1]))] = True
    probs = 1.0 / (1.0 + np.exp(-raw[..., 2 * d]))
    l_obj = focal_objectness_loss(probs, pos_mask, alpha_neg, alpha_pos, gamma)
    return total_loss(l_box, l_obj, l_class, beta)


def head_loss_grad(raw, pos_idx, target_centers, target_sizes, target_classes,
                   anchor_sizes, strides, origin=None, beta: float = BETA,
                   alpha_neg: float = FOCAL_ALPHA_NEG,
                   alpha_pos: float = FOCAL_ALPHA_POS,
                   gamma: float = FOCAL_GAMMA) -> np.ndarray:
    """Analytic gradient of ``head_loss`` with respect to every raw logit.

    The probability clamp of the focal term is ignored in the derivative
    (it only binds for |logit| > ~16).
    """
    raw = np.asarray(raw, dtype=np.float64)
    strides = np.asarray(strides, dtype=np.float64)
    d = len(strides)
    origin = np.zeros(d) if origin is None else np.asarray(origin, dtype=np.float64)
    anchor_sizes = np.asarray(anchor_sizes, dtype=np.float64)
    pos_idx = np.atleast_2d(np.asarray(pos_idx, dtype=np.int64))
    grad = np.zeros_like(raw)

    n_cells = int(np.prod(raw.shape[:-1]))
    n_pos = len(pos_idx) if pos_idx.size else 0

    # Objectness (all cells).
    pos_mask = np.zeros(raw.shape[:-1], dtype=bool)
    if n_pos:
        pos_mask[tuple(pos_idx[:, i] for i in range(pos_idx.shape[1]))] = True
    t_o = raw[..., 2 * d]
    p = 1.0 / (1.0 + np.exp(-t_o))
    pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    df_dp = np.where(
        pos_mask,
        alpha_pos * (gamma * (1.0 - pc) ** (gamma - 1.0) * np.log(pc)
                     - (1.0 - pc) ** gamma / pc),
        alpha_neg * (-gamma * pc ** (gamma - 1.0) * np.log1p(-pc)
                     + pc ** gamma / (1.0 - pc)))
    grad[..., 2 * d] = df_dp * p * (1.0 - p) / n_cells

    if n_pos == 0:
        return grad

    t, sig, centers, sizes = _decoded_preds(raw, pos_idx, anchor_sizes,
                                            strides, origin, d)
    tc = np.atleast_2d(np.asarray(target_centers, dtype=np.float64))
    ts = np.atleast_2d(np.asarray(target_sizes, dtype=np.float64))
    idx = tuple(pos_idx[:, i] for i in range(pos_idx.shape[1]))

    g_center = beta * 2.0 * (centers - tc) * sig * (1.0 - sig) * strides / n_pos
    sqrt_sz = np.sqrt(sizes)
    g_size = beta * (sqrt_sz - np.sqrt(ts)) * sqrt_sz / n_pos

    logits = t[:, 2 * d + 1:]
    shifted = logits - logits.max(axis=1, keepdims=True)
    soft = np.exp(shifted)
    soft /= soft.sum(axis=1, keepdims=True)
    onehot = np.zeros_like(soft)
    onehot[np.arange(n_pos), np.asarray(target_classes, dtype=np.int64)] = 1.0
    g_class = (soft - onehot) / n_pos

    # The objectness column is already filled; block leaves it zero.
    block = np.zeros((n_pos, raw.shape[-1]))
    block[:, :d] = g_center
    block[:, d:2 * d] = g_size
    block[:, 2 * d + 1:] = g_class
    np.add.at(grad, idx, block)
    return grad
