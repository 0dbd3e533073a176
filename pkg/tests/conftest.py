import numpy as np
import pytest

from hyperembed.graph import Graph

ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(lines):
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def acceptance(request):
    """Record ``(criterion, passed, detail)`` for the end-of-run summary."""
    def record(num, ok, detail=""):
        request.config.stash[ACCEPTANCE_KEY].append((num, bool(ok), detail))
        print(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
    return record


def floyd_warshall(g: Graph) -> np.ndarray:
    """All-pairs hop distances, independent of the BFS kernels."""
    n = g.n
    D = np.full((n, n), np.inf)
    np.fill_diagonal(D, 0.0)
    for u in range(n):
        for v in g.neighbors(u):
            D[u, v] = 1.0
    for k in range(n):
        D = np.minimum(D, D[:, k:k + 1] + D[k:k + 1, :])
    return D


def random_connected_graph(n: int, p: float, rng) -> Graph:
    """Random spanning tree plus Erdos-Renyi extras."""
    perm = rng.permutation(n)
    u = [perm[i] for i in range(1, n)]
    v = [perm[rng.integers(0, i)] for i in range(1, n)]
    A = np.triu(rng.random((n, n)) < p, 1)
    a, b = np.nonzero(A)
    return Graph.from_edges(np.concatenate([u, a]), np.concatenate([v, b]), n)


def positive_lorentz_matrix(d: int, rng) -> np.ndarray:
    """Hyperbolic rotation in the (1,2)-plane composed with a spacelike rotation."""
    t = rng.normal() * 1.5
    B = np.eye(d + 1)
    B[0, 0] = B[1, 1] = np.cosh(t)
    B[0, 1] = B[1, 0] = np.sinh(t)
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    R = np.eye(d + 1)
    R[1:, 1:] = Q
    return R @ B


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
