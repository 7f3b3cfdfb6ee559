import numpy as np
import pytest


def kron_lyapunov(F, Q):
    """Oracle: solve F^T P + P F = -Q through the vectorized Kronecker system."""
    n = F.shape[0]
    I = np.eye(n)
    K = np.kron(I, F.T) + np.kron(F.T, I)
    p = np.linalg.solve(K, -Q.reshape(-1, order="F"))
    return p.reshape(n, n, order="F")


def kleinman_kron_care(A, B, C, iters=60):
    """Oracle: Newton-Kleinman with Kronecker Lyapunov solves and a Bass start."""
    n = A.shape[0]
    beta = max(np.linalg.eigvals(A).real.max(), 0.0) + 1.0
    X = kron_lyapunov(-(A + beta * np.eye(n)).T, 2 * B @ B.T)
    # (A + beta I) X + X (A + beta I)^T = 2 B B^T;  K0 = B^T X^{-1}
    K = B.T @ np.linalg.inv(X)
    for _ in range(iters):
        F = A - B @ K
        P = kron_lyapunov(F, C.T @ C + K.T @ K)
        K = B.T @ P
    res = A.T @ P + P @ A - P @ B @ B.T @ P + C.T @ C
    assert np.linalg.norm(res) <= 1e-9 * max(np.linalg.norm(C.T @ C), 1.0), "oracle did not converge"
    return 0.5 * (P + P.T)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call" or report.outcome != "passed":
        prev = _CRITERIA.get(name)
        if prev is None or prev == "PASS":
            _CRITERIA[name] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA):
        num, _, label = name[len("test_criterion_"):].partition("_")
        terminalreporter.write_line(f"criterion {int(num):2d} {_CRITERIA[name]}  {label.replace('_', ' ')}")
