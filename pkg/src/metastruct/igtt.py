"""Iterative ground-truth training (iGTT): unsupervised binary segmentation.

Starting from all-background pseudo-labels, every epoch fits the predictor,
thresholds its output at ``K`` evenly spaced levels, keeps the candidate
with the lowest DMI loss, and refines it with EMS into the next labels.
"""

from dataclasses import dataclass, field

import numpy as np

from metastruct.ems import EmsParams, ems_refine
from metastruct.losses import dmi_loss
from metastruct.masks import as_prob_image
from metastruct.metrics import evaluate
from metastruct.predictor import LogisticPredictor
from metastruct.seeding import stage_rng


@dataclass
class Ladder:
    thresholds: np.ndarray
    masks: list
    flat: bool = False


def threshold_ladder(p, k: int) -> Ladder:
    """``k`` masks ``p > t`` for thresholds evenly spaced over [min p, max p].

    A flat ``p`` yields just the all-foreground and all-background masks and
    sets ``flat``.
    """
    if k < 2:
        raise ValueError(f"need at least two thresholds, got {k}")
    p = as_prob_image(p)
    lo, hi = float(p.min()), float(p.max())
    if hi == lo:
        return Ladder(np.array([np.nextafter(lo, -np.inf), lo]),
                      [np.ones(p.shape, np.uint8), np.zeros(p.shape, np.uint8)], flat=True)
    thresholds = np.linspace(lo, hi, k)
    # ties at a threshold go to background
    return Ladder(thresholds, [(p > t).astype(np.uint8) for t in thresholds])


def select_candidate(p, candidates) -> tuple[int, np.ndarray, list]:
    """Candidate with the smallest DMI loss; ties go to the lowest index.

    Returns ``(index, mask, losses)``.
    """
    if len(candidates) == 0:
        raise ValueError("no candidates to select from")
    losses = [dmi_loss(p, s) for s in candidates]
    best = int(np.argmin(losses))
    return best, candidates[best], losses


@dataclass
class IgttConfig:
    k: int = 30
    ems: EmsParams = field(default_factory=EmsParams)
    max_iters: int = 30
    lr: float = 0.1
    seed: int = 0
    use_ems: bool = True
    fit_first: bool = True
    snapshot_every: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("K must be >= 2")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


class PredictorFailure(RuntimeError):
    def __init__(self, epoch: int, cause: Exception):
        super().__init__(f"predictor failed at epoch {epoch}: {cause}")
        self.epoch = epoch


@dataclass
class IgttResult:
    predictor: object
    labels: list                      # final Y* per image
    selections: list                  # final selected candidate per image
    probabilities: list               # final predictor output per image
    trajectory: list = field(default_factory=list)   # Y* per epoch, epoch 0 first
    metrics: list = field(default_factory=list)      # dicts per epoch and image
    selected_index: list = field(default_factory=list)


def _epoch_step(predictor, images, labels, cfg, epoch):
    fit_rng = stage_rng(cfg.seed, "igtt-fit", epoch)
    try:
        if cfg.fit_first:
            predictor.fit_epoch(images, labels, fit_rng)
            probs = [as_prob_image(predictor.predict(x)) for x in images]
        else:
            probs = [as_prob_image(predictor.predict(x)) for x in images]
            predictor.fit_epoch(images, labels, fit_rng)
    except Exception as exc:
        raise PredictorFailure(epoch, exc) from exc
    return probs


def igtt_run(images, config: IgttConfig | None = None, predictor=None, references=None) -> IgttResult:
    """Run the iGTT loop over a list of intensity images.

    With ``references`` (binary masks, same order) every epoch also records
    Dice / IoU / accuracy of the selected candidate and the AUC of the
    predictor output.
    """
    cfg = config or IgttConfig()
    images = [np.asarray(x, dtype=float) for x in images]
    if not images:
        raise ValueError("training set is empty")
    if predictor is None:
        predictor = LogisticPredictor(lr=cfg.lr)
    labels = [np.zeros(x.shape, dtype=np.uint8) for x in images]
    result = IgttResult(predictor, labels, [], [], trajectory=[[y.copy() for y in labels]])
    selections = probs = None
    for epoch in range(1, cfg.max_iters + 1):
        probs = _epoch_step(predictor, images, labels, cfg, epoch)
        selections, chosen, new_labels = [], [], []
        for i, p in enumerate(probs):
            ladder = threshold_ladder(p, cfg.k)
            if ladder.flat:
                idx, s_tilde = -1, np.zeros(p.shape, dtype=np.uint8)
            else:
                idx, s_tilde, _ = select_candidate(p, ladder.masks)
            selections.append(s_tilde)
            chosen.append(idx)
            if cfg.use_ems:
                rng = stage_rng(cfg.seed, "igtt-ems", epoch, i)
                new_labels.append(ems_refine(s_tilde, cfg.ems, rng=rng))
            else:
                new_labels.append(s_tilde.copy())
            if references is not None:
                rep = evaluate(s_tilde, references[i], prob=p).as_dict()
                result.metrics.append({"epoch": epoch, "image": i, **rep})
        labels = new_labels
        result.trajectory.append([y.copy() for y in labels])
        result.selected_index.append(chosen)
    result.labels = labels
    result.selections = selections
    result.probabilities = probs
    return result


def final_dice(result: IgttResult, references) -> float:
    """Mean Dice of the last epoch's selected candidates."""
    return float(np.mean([evaluate(s, r).dice for s, r in zip(result.selections, references)]))
