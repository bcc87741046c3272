"""Reference computations kept independent of the package internals."""
from __future__ import annotations

import itertools
import math

import numpy as np

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1, -1]).astype(complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_P0 = np.diag([1, 0]).astype(complex)
_P1 = np.diag([0, 1]).astype(complex)


def one_qubit(kind: str, angle=None) -> np.ndarray:
    if kind == "RY":
        return math.cos(angle / 2) * _I - 1j * math.sin(angle / 2) * _Y
    if kind == "RZ":
        return math.cos(angle / 2) * _I - 1j * math.sin(angle / 2) * _Z
    if kind == "P":
        return np.diag([1, np.exp(1j * angle)])
    return {"H": _H, "X": _X, "Y": _Y, "Z": _Z}[kind]


def kron_chain(ops_by_qubit: list[np.ndarray]) -> np.ndarray:
    """Tensor product with qubit 0 as the least significant factor."""
    out = np.array([[1.0 + 0j]])
    for op in reversed(ops_by_qubit):
        out = np.kron(out, op)
    return out


def embed_1q(u: np.ndarray, q: int, n: int) -> np.ndarray:
    ops = [_I] * n
    ops[q] = u
    return kron_chain(ops)


def embed_controlled(u: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    a = [_I] * n
    a[control] = _P0
    b = [_I] * n
    b[control] = _P1
    b[target] = u
    return kron_chain(a) + kron_chain(b)


def gate_unitary(kind: str, targets, angle, n: int) -> np.ndarray:
    if kind == "CNOT":
        return embed_controlled(_X, targets[0], targets[1], n)
    if kind == "CZ":
        return embed_controlled(_Z, targets[0], targets[1], n)
    return embed_1q(one_qubit(kind, angle), targets[0], n)


def circuit_unitary(gates, n: int) -> np.ndarray:
    """gates: iterable of (kind, targets, angle)."""
    U = np.eye(2**n, dtype=complex)
    for kind, targets, angle in gates:
        U = gate_unitary(kind, targets, angle, n) @ U
    return U


def zz_map_gates(x, depth: int, pairs) -> list:
    n = len(x)
    block = [("H", (q,), None) for q in range(n)]
    block += [("RZ", (q,), 2 * x[q]) for q in range(n)]
    for i, j in pairs:
        block += [("CNOT", (i, j), None), ("RZ", (j,), 2 * (math.pi - x[i]) * (math.pi - x[j])), ("CNOT", (i, j), None)]
    return block * depth


def zz_state(x, depth: int = 2, entanglement: str = "full") -> np.ndarray:
    n = len(x)
    pairs = list(itertools.combinations(range(n), 2)) if entanglement == "full" else [(i, i + 1) for i in range(n - 1)]
    return circuit_unitary(zz_map_gates(x, depth, pairs), n)[:, 0]


def power_free_centrality(W: np.ndarray) -> np.ndarray:
    """Dominant eigenvector of |W| with zero diagonal via dense eigh."""
    A = np.abs(np.asarray(W, dtype=float))
    np.fill_diagonal(A, 0.0)
    vals, vecs = np.linalg.eigh(A)
    return np.abs(vecs[:, -1])


def brute_u(xs, ys) -> float:
    return sum(1.0 if x > y else 0.5 if x == y else 0.0 for x in xs for y in ys)


def permutation_p(xs, ys) -> float:
    """Two-sided p by enumerating every relabelling of the pooled sample."""
    pooled = list(xs) + list(ys)
    nx, ny = len(xs), len(ys)
    center = nx * ny / 2
    obs = abs(brute_u(xs, ys) - center)
    hits = total = 0
    for idx in itertools.combinations(range(nx + ny), nx):
        chosen = set(idx)
        gx = [pooled[i] for i in idx]
        gy = [pooled[i] for i in range(nx + ny) if i not in chosen]
        hits += abs(brute_u(gx, gy) - center) >= obs - 1e-9
        total += 1
    return hits / total


def pair_auc(y, s) -> float:
    pos = [si for yi, si in zip(y, s) if yi == 1]
    neg = [si for yi, si in zip(y, s) if yi == 0]
    return brute_u(pos, neg) / (len(pos) * len(neg))


def dual_reference(K: np.ndarray, y: np.ndarray, C: float, iters: int = 200_000, tol: float = 1e-13) -> np.ndarray:
    """Maximize the SVM dual by projected gradient ascent.

    Projection onto {0 <= a <= C, a.y = 0} is found by bisection on the
    multiplier of the equality constraint.
    """
    Q = (y[:, None] * y[None, :]) * K
    L = max(np.linalg.eigvalsh(Q).max(), 1e-12)
    step = 1.0 / L

    def project(v):
        lo, hi = -1e3, 1e3
        for _ in range(200):
            nu = 0.5 * (lo + hi)
            a = np.clip(v - nu * y, 0, C)
            if a @ y > 0:
                lo = nu
            else:
                hi = nu
        return np.clip(v - 0.5 * (lo + hi) * y, 0, C)

    a = project(np.zeros(y.size))
    # accelerated projected gradient (FISTA) on the negated dual
    z, t = a.copy(), 1.0
    for _ in range(iters):
        grad = 1 - Q @ z
        a_new = project(z + step * grad)
        t_new = (1 + math.sqrt(1 + 4 * t * t)) / 2
        z = a_new + (t - 1) / t_new * (a_new - a)
        if np.max(np.abs(a_new - a)) < tol:
            a = a_new
            break
        a, t = a_new, t_new
    return a


def dual_value(a, K, y) -> float:
    ay = a * y
    return float(a.sum() - 0.5 * ay @ K @ ay)


def dual_grid_max(K, y, C, steps: int = 41) -> float:
    """Exhaustive maximization over a grid of feasible alphas (small m only)."""
    m = y.size
    grid = np.linspace(0, C, steps)
    best = -np.inf
    for head in itertools.product(grid, repeat=m - 1):
        head = np.array(head)
        # last alpha fixed by the equality constraint
        last = -(head @ y[:-1]) * y[-1]
        if -1e-12 <= last <= C + 1e-12:
            a = np.append(head, min(max(last, 0.0), C))
            best = max(best, dual_value(a, K, y))
    return best


def binomial_sigma(p: float, shots: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / shots)
