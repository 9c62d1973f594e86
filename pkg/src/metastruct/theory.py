"""Empirical checks of the density-based claims about noisy labels.

* interior densities of a corrupted label match the NTM entries
  (:func:`interior_density_cells`);
* a full-rank, well-separated NTM keeps the clean label's meta-structure
  layout except near true boundaries (:func:`cluster_boundary_check`);
* morphological perturbation disturbs the density maps over an area that
  grows with the structuring-element radius (:func:`perturbation_areas`).
"""

from dataclasses import dataclass

import numpy as np

from metastruct.corruption import pcl
from metastruct.masks import as_label_image, infer_num_classes, same_shape
from metastruct.ntm import check_ntm
from metastruct.sdd import (binomial_sigma, boundary_distance, count_semantic_classes,
                            density_maps, interior_mask, nearest_cluster)


@dataclass
class DensityCell:
    observed: int
    region: int
    n_pixels: int
    empirical: float
    predicted: float
    sigma: float

    @property
    def passed(self) -> bool:
        return abs(self.empirical - self.predicted) <= 3 * self.sigma


def interior_density_cells(y, y_star, q, h: int = 8, min_pixels: int = 500) -> list[DensityCell]:
    """Mean observed density per (observed class, true region) over region interiors.

    Interior pixels have their whole window inside one true region. Regions
    with fewer than ``min_pixels`` interior pixels are skipped.
    """
    same_shape(y, y_star)
    q = check_ntm(q)
    m = q.shape[0]
    y = as_label_image(y, m)
    maps = density_maps(y_star, h, m)
    area = (2 * h + 1) ** 2
    cells = []
    for i in range(m):
        inside = interior_mask(y, h, region=i)
        n = int(inside.sum())
        if n < min_pixels:
            continue
        for j in range(m):
            p = float(q[j, i])
            cells.append(DensityCell(j, i, n, float(maps[j][inside].mean()), p,
                                     float(np.sqrt(p * (1 - p) / area))))
    return cells


def dominant_clusters(y_star, h: int = 8, num_classes: int | None = None) -> np.ndarray:
    """Per-pixel dominant meta-structure label.

    Clusters come from the bandwidth-``h`` densities; each pixel is then
    assigned by its density vector over the wider ``(4h+1)^2`` window, which
    halves the sampling noise while still only looking ``2h`` pixels away.
    """
    y_star = as_label_image(y_star, num_classes)
    summary = count_semantic_classes(y_star, h, num_classes)
    wide = density_maps(y_star, 2 * h, num_classes)
    return nearest_cluster(wide, [np.asarray(c) for c in summary.levels])


@dataclass
class BoundaryCheck:
    num_clusters: int
    num_classes: int
    mismatched: int
    max_distance: float
    band: int

    @property
    def passed(self) -> bool:
        return self.num_clusters == self.num_classes and self.max_distance <= self.band


def cluster_boundary_check(y, y_star, h: int = 8) -> BoundaryCheck:
    """Compare the dominant clusters of ``y_star`` with the clean classes of ``y``.

    Each cluster is matched to the clean class it overlaps most; pixels where
    the matched class differs from ``y`` must lie within ``2h`` of a clean
    boundary. Pixels within ``2h`` of the image border (clipped windows) are
    not judged.
    """
    same_shape(y, y_star)
    y = as_label_image(y)
    m = infer_num_classes(y)
    labels = dominant_clusters(y_star, h, max(m, infer_num_classes(y_star)))
    k = int(labels.max()) + 1
    overlap = np.zeros((k, m), dtype=np.int64)
    np.add.at(overlap, (labels.ravel(), y.ravel()), 1)
    mapped = overlap.argmax(axis=1)[labels]
    H, W = y.shape
    judged = np.zeros(y.shape, dtype=bool)
    judged[2 * h:H - 2 * h, 2 * h:W - 2 * h] = True
    wrong = (mapped != y) & judged
    dist = boundary_distance(y)
    worst = float(dist[wrong].max()) if wrong.any() else 0.0
    return BoundaryCheck(k, len(np.unique(y)), int(wrong.sum()), worst, 2 * h)


def disturbed_area(y, y_noisy, h: int = 8) -> int:
    """Pixels where any density channel moves by more than three binomial sigmas."""
    same_shape(y, y_noisy)
    m = max(infer_num_classes(y), infer_num_classes(y_noisy))
    a = density_maps(y, h, m)
    b = density_maps(y_noisy, h, m)
    tol = 3 * binomial_sigma(a, h)
    return int((np.abs(a - b) > tol).any(axis=0).sum())


def perturbation_areas(y, kind: str, radii, h: int = 8) -> list[int]:
    """:func:`disturbed_area` of ``pcl(y, kind, r)`` for each radius."""
    return [disturbed_area(y, pcl(y, kind, r), h) for r in radii]
