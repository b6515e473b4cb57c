import numpy as np
import pytest

from revunc import _pykernels

try:
    from revunc import _kernels
except ImportError:  # pragma: no cover
    _kernels = None

BACKENDS = [pytest.param(_pykernels, id="python")]
if _kernels is not None:
    BACKENDS.append(pytest.param(_kernels, id="compiled"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def mc_close(sample_mean, target, sample_sd, n, k=3.0):
    """|mean - target| within k Monte-Carlo standard errors."""
    se = np.asarray(sample_sd) / np.sqrt(n)
    return np.all(np.abs(np.asarray(sample_mean) - np.asarray(target)) <= k * se + 1e-12)


def random_spd_block_tridiag(n_blocks, k, rng, cond=None):
    """Dense SPD block-tridiagonal matrix."""
    n = n_blocks * k
    A = np.zeros((n, n))
    for t in range(n_blocks):
        B = rng.standard_normal((k, k))
        A[t * k:(t + 1) * k, t * k:(t + 1) * k] = B @ B.T + k * np.eye(k)
        if t:
            C = 0.3 * rng.standard_normal((k, k))
            A[t * k:(t + 1) * k, (t - 1) * k:t * k] = C
            A[(t - 1) * k:t * k, t * k:(t + 1) * k] = C.T
    # diagonal dominance keeps it positive definite
    A += np.diag(np.abs(A).sum(1))
    return A


# -- one summary line per acceptance criterion ------------------------------------

_CRITERIA = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    k = int(name.split("_")[2])
    detail = dict(report.user_properties).get("detail", "")
    if report.skipped:
        reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else ""
        _CRITERIA[k] = ("SKIP", reason.removeprefix("Skipped: "))
    elif report.failed:
        _CRITERIA[k] = ("FAIL", detail or f"{report.when} failed")
    elif report.when == "call":
        _CRITERIA[k] = ("PASS", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        status, detail = _CRITERIA[k]
        terminalreporter.write_line(f"criterion {k}: {status}  {detail}".rstrip())
