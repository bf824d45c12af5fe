import numpy as np
import pytest

from orthohash import encoder as enc
from orthohash.encoder import BatchMode


def central_difference(f, x, h=1e-5):
    """Numerical gradient of scalar f at array x (x is perturbed in place and restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_error(a, b):
    """Norm-wise relative error between two gradient arrays."""
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


def brute_top_r(ids, signs, query_signs, r):
    """Rank by (K - dot)/2 with a plain sort; independent of popcount."""
    k = signs.shape[1]
    d = [(int((k - int(s @ query_signs)) // 2), int(i)) for i, s in zip(ids, signs)]
    d.sort()
    return [(i, dist) for dist, i in d[:r]]


def brute_ap(flags, r, n_relevant):
    """Average precision by explicit enumeration of hit positions."""
    hits, total = 0, 0.0
    for k, f in enumerate(flags[:r], start=1):
        if f:
            hits += 1
            total += hits / k
    return total / min(n_relevant, r)


def encoder_fd_errors(params, x, upstream, h=1e-5):
    """Max norm-wise relative error of backward vs central differences over all arrays."""
    snapshot = params.copy()

    def objective():
        p = snapshot.copy()
        codes, _ = enc.forward(p, x, BatchMode.TRAIN)
        return float(np.sum(codes * upstream))

    work = snapshot.copy()
    _, cache = enc.forward(work, x, BatchMode.TRAIN)
    grads, gx = enc.backward(cache, upstream)
    errors = {}
    for name, arr in snapshot.named_arrays().items():
        errors[name] = rel_error(grads[name], central_difference(objective, arr, h))
    xx = x.copy()
    errors["input"] = rel_error(gx, central_difference(
        lambda: float(np.sum(enc.forward(snapshot.copy(), xx, BatchMode.TRAIN)[0] * upstream)), xx, h))
    return errors


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None and (report.when == "call" or report.failed):
        number, title = marker.args
        ok = report.passed and _criteria.get(number, (True,))[0]
        _criteria[number] = (ok, title, item.user_properties)
    return report


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        ok, title, props = _criteria[number]
        detail = ", ".join(f"{k}={v}" for k, v in props)
        line = f"{'PASS' if ok else 'FAIL'}  #{number:<2} {title}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)
