"""Acceptance criteria 1-9. Each test records a pass/fail line shown in the
terminal summary under "acceptance criteria"."""

import filecmp
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.signal import convolve2d
from skimage.filters import threshold_otsu

from metastruct.cli import main as cli_main
from metastruct.corruption import apply_ntm, dynamic_ntm, make_rcl_ntm
from metastruct.ems import EmsParams, ems_refine, shift_pixels
from metastruct.fixtures import blobs, circle_in_rectangle, stripes3
from metastruct.igtt import IgttConfig, final_dice, igtt_run
from metastruct.losses import dmi_gradient, dmi_loss, soft_iou_gradient, soft_iou_loss
from metastruct.metrics import overlap_metrics
from metastruct.morphology import dilate, skeletonize
from metastruct.ntm import crd, ntm_rank
from metastruct.sdd import count_semantic_classes
from metastruct.theory import cluster_boundary_check, interior_density_cells
from oracles import central_difference
from test_ntm import RCL_SUITE, suite_matrix
from test_morphology import random_mask


def test_criterion_1_rank_and_min_crd_suite(acceptance):
    t0 = time.perf_counter()
    ranks, mins = [], []
    for text, _, _ in RCL_SUITE:
        q = suite_matrix(text)
        ranks.append(ntm_rank(q))
        mins.append(round(crd(q).min_value, 12))
    elapsed = time.perf_counter() - t0
    want_r = [r for _, r, _ in RCL_SUITE]
    want_d = [d for _, _, d in RCL_SUITE]
    ok = ranks == want_r and mins == want_d and elapsed < 1.0
    acceptance(1, ok, f"ranks {ranks}, min d {mins}, {elapsed * 1000:.1f} ms")
    assert ranks == [3, 3, 3, 2, 2, 2, 1, 1, 1]
    assert mins == [0.6, 0.2, 0.2, 0, 0, 0, 0, 0, 0]
    assert elapsed < 1.0


def test_criterion_2_crd_spot_values(acceptance):
    got = {
        "identity": crd(np.eye(2)).min_value,
        "0.02 matrix": crd([[0.79, 0.8], [0.21, 0.2]]).min_value,
    }
    want = {"identity": 2.0, "0.02 matrix": 0.02}
    for eps in (0.01, 0.05, 0.1):
        for p01 in (0.2, 0.45):
            q = make_rcl_ntm("pair", p01, 1 - p01 + eps)
            got[f"pair {p01} eps {eps}"] = crd(q).min_value
            want[f"pair {p01} eps {eps}"] = 2 * eps
    bad = {k: v for k, v in got.items() if abs(v - want[k]) > 1e-12}
    acceptance(2, not bad, f"{len(got) - len(bad)}/{len(got)} exact" + (f", off: {bad}" if bad else ""))
    assert not bad


def _interior_means_oracle(y, ys, m, h):
    """Interior means via direct 2-D convolution, independent of the library."""
    k = np.ones((2 * h + 1, 2 * h + 1))
    area = (2 * h + 1) ** 2
    out = {}
    for i in range(m):
        pure = convolve2d((y == i).astype(float), k, mode="valid") == area
        for j in range(m):
            counts = convolve2d((ys == j).astype(float), k, mode="valid")
            out[(j, i)] = (counts[pure] / area).mean(), int(pure.sum())
    return out


def test_criterion_3_interior_density(acceptance):
    h = 8
    y = circle_in_rectangle()
    r = np.random.default_rng(2024)
    t0 = time.perf_counter()
    cells = []
    for k in range(20):
        q = r.dirichlet(np.ones(2), size=2).T
        ys = apply_ntm(y, q, r)
        cells += [(c, q, ys) for c in interior_density_cells(y, ys, q, h)]
    elapsed = time.perf_counter() - t0
    passed = sum(c.passed for c, _, _ in cells)
    # cross-check the library's interior means and predictions against the oracle
    agree = 0
    for c, q, ys in cells[::4]:
        mean, n = _interior_means_oracle(y, ys, 2, h)[(c.observed, c.region)]
        agree += abs(mean - c.empirical) < 1e-12 and n == c.n_pixels and c.predicted == q[c.observed, c.region]
    n_checked = len(cells[::4])
    frac = passed / len(cells)
    ok = frac >= 0.95 and agree == n_checked and elapsed < 10 and all(c.n_pixels >= 500 for c, _, _ in cells)
    acceptance(3, ok, f"{passed}/{len(cells)} cells within 3 sigma, oracle agreement {agree}/{n_checked}, "
                      f"{elapsed:.2f} s")
    assert frac >= 0.95
    assert agree == n_checked
    assert elapsed < 10


def test_criterion_4_semantic_classes_equal_rank(acceptance):
    y = stripes3(256)
    h = 8
    hits, total, misses = 0, 0, []
    for text, _, _ in RCL_SUITE:
        q = suite_matrix(text)
        want = ntm_rank(q)
        for seed in range(10):
            d = count_semantic_classes(apply_ntm(y, q, seed), h, 3).num_classes
            total += 1
            hits += d == want
            if d != want:
                misses.append((text, seed, d, want))
    circle = circle_in_rectangle()
    clean_d = count_semantic_classes(circle, h).num_classes
    fused_d = count_semantic_classes(apply_ntm(circle, [[0.7, 0.7], [0.3, 0.3]], 0), h, 2).num_classes
    acceptance(4, hits == total and clean_d == 2 and fused_d == 1,
               f"D == rank in {hits}/{total}; clean circle D={clean_d}, rank-1 circle D={fused_d}")
    assert not misses
    assert clean_d == 2 and fused_d == 1


def test_criterion_4_cluster_boundaries_in_band(acceptance):
    h = 8
    results = []
    for fixture, m in ((circle_in_rectangle(), 2), (stripes3(256), 3)):
        for epoch in range(10):
            q = dynamic_ntm(m, epoch, 0)
            assert ntm_rank(q) == m and crd(q).min_value >= 0.2
            results.append(cluster_boundary_check(fixture, apply_ntm(fixture, q, 500 + epoch), h))
    passed = sum(r.passed for r in results)
    worst = max(r.max_distance for r in results)
    acceptance(4, passed == len(results),
               f"full-rank NTMs: {passed}/{len(results)} with cluster changes inside the {2 * h}-px band "
               f"(worst distance {worst:.0f})")
    assert passed == len(results)


def test_criterion_5_dmi(acceptance):
    s = np.zeros((16, 16), dtype=np.uint8)
    s[:8, :8] = 1
    value_err = abs(dmi_loss(s.astype(float), s) - (-np.log(0.1875)))
    r = np.random.default_rng(77)
    swap_ok = True
    worst_dmi = worst_iou = 0.0
    for _ in range(100):
        p = r.uniform(0.05, 0.95, size=(16, 16))
        t = (r.random((16, 16)) < p).astype(np.uint8)
        swap_ok &= dmi_loss(p, t) == dmi_loss(p, 1 - t)
        for fn, grad, name in ((dmi_loss, dmi_gradient, "dmi"), (soft_iou_loss, soft_iou_gradient, "iou")):
            num = central_difference(lambda x: fn(x, t), p)
            rel = np.max(np.abs(grad(p, t) - num) / np.maximum(np.abs(num), 1e-8))
            if name == "dmi":
                worst_dmi = max(worst_dmi, rel)
            else:
                worst_iou = max(worst_iou, rel)
    ok = value_err <= 1e-9 and swap_ok and worst_dmi < 1e-4 and worst_iou < 1e-4
    acceptance(5, ok, f"|loss - (-ln 0.1875)| = {value_err:.1e}, swap exact: {swap_ok}, "
                      f"max rel grad err dmi {worst_dmi:.1e} / iou {worst_iou:.1e}")
    assert value_err <= 1e-9 and swap_ok
    assert worst_dmi < 1e-4 and worst_iou < 1e-4


def test_criterion_6_dice_iou_identity(acceptance):
    r = np.random.default_rng(6)
    worst = 0.0
    for _ in range(1000):
        shape = tuple(r.integers(4, 40, size=2))
        a = r.random(shape) < r.random()
        b = r.random(shape) < r.random()
        rep = overlap_metrics(a, b)
        worst = max(worst, abs(rep.dice - 2 * rep.iou / (1 + rep.iou)))
    # reported values carry three digits: iou 0.754 +- 5e-4, dice 0.859 +- 5e-4
    implied = 2 * 0.754 / 1.754
    lo, hi = (2 * v / (1 + v) for v in (0.7535, 0.7545))
    pair_ok = lo <= 0.8595 and hi >= 0.8585
    acceptance(6, worst <= 1e-12 and pair_ok,
               f"max identity error {worst:.1e} over 1000 pairs; iou 0.754 implies dice {implied:.4f}, "
               f"rounding interval [{lo:.4f}, {hi:.4f}] meets 0.859 +- 0.0005: {pair_ok}")
    assert worst <= 1e-12
    assert pair_ok


def test_criterion_7_ems(acceptance):
    r = np.random.default_rng(7)
    contained = reduced = full_kept = True
    kept = expected = var = 0.0
    exceed = 0
    for k in range(100):
        y = random_mask(r, (48, 48), density=r.uniform(0.35, 0.65))
        rad = int(r.integers(0, 3))
        p = float(r.uniform(0.1, 0.9))
        skel = skeletonize(y)
        out = ems_refine(y, EmsParams(r=rad, p_sample=p), rng=np.random.default_rng(k))
        allowed = dilate(skel, rad) if rad else skel
        contained &= bool(np.all(out <= allowed))
        # replaying the stream reproduces the shifted set that was sampled from
        n = int(shift_pixels(skel.astype(bool), rad, np.random.default_rng(k)).sum())
        kept += out.sum()
        expected += p * n
        var += n * p * (1 - p)
        exceed += n > 0 and abs(out.sum() - p * n) > 3 * np.sqrt(n * p * (1 - p))
        everything = ems_refine(y, EmsParams(r=rad, p_sample=1.0), rng=np.random.default_rng(k))
        full_kept &= int(everything.sum()) == n
        reduced &= np.array_equal(ems_refine(y, EmsParams(r=0, p_sample=1.0, seed=k)), skel)
    z = (kept - expected) / np.sqrt(var)
    ok = contained and reduced and full_kept and abs(z) <= 3
    acceptance(7, ok, f"containment {contained}, r=0/p=1 equals skeleton {reduced}, p=1 keeps all {full_kept}, "
                      f"pooled retention z = {z:+.2f} ({exceed}/100 single masks beyond 3 sigma)")
    assert contained and reduced and full_kept
    assert abs(z) <= 3


@pytest.mark.slow
def test_criterion_8_igtt_vs_otsu(acceptance):
    t0 = time.perf_counter()
    wins, with_ems, without_ems, lines = 0, [], [], []
    for seed in range(10):
        mask, x = blobs(128, seed)
        otsu = overlap_metrics(x > threshold_otsu(x), mask).dice
        d_ems = final_dice(igtt_run([x], IgttConfig(k=30, ems=EmsParams(r=1, p_sample=0.1), max_iters=30,
                                                   seed=seed)), [mask])
        d_raw = final_dice(igtt_run([x], IgttConfig(k=30, max_iters=30, seed=seed, use_ems=False)), [mask])
        wins += d_ems >= otsu
        with_ems.append(d_ems)
        without_ems.append(d_raw)
        lines.append(f"{seed}:{d_ems:.3f}/{otsu:.3f}")
    elapsed = time.perf_counter() - t0
    ok = wins >= 8 and np.mean(with_ems) >= np.mean(without_ems) and elapsed < 300
    acceptance(8, ok, f"iGTT >= Otsu on {wins}/10 seeds; mean dice with EMS {np.mean(with_ems):.3f} vs "
                      f"without {np.mean(without_ems):.3f}; {elapsed:.0f} s; per seed {' '.join(lines)}")
    assert wins >= 8
    assert np.mean(with_ems) >= np.mean(without_ems)
    assert elapsed < 300


def _cli_runs(root: Path):
    root.mkdir()
    cl = root / "cl.png"
    imgs, refs = root / "imgs", root / "refs"
    imgs.mkdir()
    refs.mkdir()
    q = root / "q.json"
    q.write_text('{"m": 2, "columns": [[0.8, 0.2], [0.3, 0.7]]}\n')
    cmds = [
        ["fixture", "--out", cl],
        ["fixture", "--kind", "stripes-3", "--size", 96, "--out", root / "s3.pgm"],
        ["fixture", "--kind", "blobs-with-intensity", "--size", 64, "--seed", 5,
         "--out", refs / "b.png", "--intensity-out", imgs / "b.png"],
        ["corrupt", "--mask", cl, "--ntm", q, "--seed", 7, "--out", root / "rcl.png"],
        ["corrupt", "--mask", cl, "--dynamic", 2, "--seed", 7, "--out", root / "dyn.png",
         "--save-ntm", root / "dyn.json"],
        ["corrupt", "--mask", cl, "--rl", 0.3, "--seed", 7, "--out", root / "rl.png"],
        ["corrupt", "--mask", cl, "--pcl", "dilate", "--out", root / "pcl.png"],
        ["ems", "--mask", cl, "--r", 2, "--seed", 7, "--out", root / "ems.png"],
        ["analyze-sdd", "--mask", root / "rcl.png", "--reference", cl, "--out-dir", root / "sdd"],
        ["crd", "--ntm", q, "--json", root / "crd.json"],
        ["igtt", "--images", imgs, "--refs", refs, "--epochs", 5, "--snapshot-every", 2,
         "--seed", 7, "--out-dir", root / "igtt"],
        ["metrics", "--pred", root / "rcl.png", "--ref", cl, "--out", root / "metrics.csv"],
    ]
    codes = [cli_main([str(a) for a in c]) for c in cmds]
    return codes, sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())


def test_criterion_9_cli_determinism(tmp_path, acceptance, capsys):
    codes_a, files_a = _cli_runs(tmp_path / "a")
    codes_b, files_b = _cli_runs(tmp_path / "b")
    capsys.readouterr()
    same = [f for f in files_a if filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False)]
    ok = codes_a == codes_b == [0] * len(codes_a) and files_a == files_b and len(same) == len(files_a)
    acceptance(9, ok, f"{len(codes_a)} commands, {len(same)}/{len(files_a)} output files byte-identical")
    assert codes_a == [0] * len(codes_a)
    assert files_a == files_b
    assert len(same) == len(files_a)
