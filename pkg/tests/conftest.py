import numpy as np
import pytest

CRITERIA = {
    1: "NTM rank and minimum CRD over the nine-matrix reference suite",
    2: "CRD spot values (identity, 0.02 matrix, pair construction 2*eps)",
    3: "interior densities match NTM entries within 3 sigma",
    4: "meta-structure count equals NTM rank; cluster boundaries stay in the 2h band",
    5: "DMI value, swap invariance, finite-difference gradients",
    6: "dice = 2 iou / (1 + iou) identity",
    7: "EMS containment, retention rate and reduction to the skeleton",
    8: "iGTT beats Otsu on >= 8/10 seeds; EMS helps on average",
    9: "CLI runs are byte-identical for a fixed seed",
}

_results: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture
def acceptance():
    """``acceptance(n, ok, detail)`` records one check for criterion ``n``."""
    def record(n: int, ok: bool, detail: str = ""):
        _results.setdefault(n, []).append((bool(ok), detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        checks = _results.get(n)
        if not checks:
            continue
        ok = all(c[0] for c in checks)
        details = "; ".join(d for _, d in checks if d)
        tr.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} | {title} | {details}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
