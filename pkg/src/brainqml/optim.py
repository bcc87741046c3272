"""
Derivative-free minimization by linear approximation (COBYLA).

The implementation follows Powell's scheme: the objective and every
constraint ``c_i(x) >= 0`` are interpolated linearly on a simplex of n+1
points, a step is taken inside a trust region of radius ``rho`` using the
linear models, and the merit function ``f + mu * max_violation`` decides
which vertex the new point replaces. ``rho`` halves from ``rho_begin``
down to ``rho_end``.

With ``adaptive_radius`` the trust radius is kept separate from ``rho``: it
doubles after steps whose actual merit reduction is close to the predicted
one and halves after poor steps, never dropping below ``rho``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

Objective = Callable[[np.ndarray], float]
Constraint = Callable[[np.ndarray], float]

# simplex acceptability and step parameters of the original COBYLA method
_ALPHA = 0.25
_BETA = 2.1
_GAMMA = 0.5
_DELTA = 1.1


class OptimizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    rho_begin: float = 1.0
    rho_end: float = 1e-4
    max_evals: int = 1000
    seed: int = 0
    method: str = "cobyla"
    # let the trust radius grow past rho after good steps
    adaptive_radius: bool = False

    def __post_init__(self):
        if not self.rho_begin > self.rho_end > 0:
            raise ValueError("need rho_begin > rho_end > 0")
        if self.method not in ("cobyla", "nelder-mead"):
            raise ValueError(f"unknown method {self.method!r}")

    def to_dict(self) -> dict:
        return {
            "rho_begin": self.rho_begin,
            "rho_end": self.rho_end,
            "max_evals": self.max_evals,
            "seed": self.seed,
            "method": self.method,
            "adaptive_radius": self.adaptive_radius,
        }

    @classmethod
    def from_dict(cls, d) -> "OptimizerConfig":
        return cls(**{k: d[k] for k in ("rho_begin", "rho_end", "max_evals", "seed", "method", "adaptive_radius") if k in d})


@dataclass
class OptimizationResult:
    x_best: np.ndarray
    f_best: float
    n_evals: int
    history: list[tuple[int, float]] = field(default_factory=list)
    violations: list[float] = field(default_factory=list)
    status: str = "converged"

    @property
    def hit_max_evals(self) -> bool:
        return self.status == "max_evals"

    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate(np.array([f for _, f in self.history]))

    def curve_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eval", "objective"])
        for i, f in self.history:
            w.writerow([i, repr(float(f))])
        return buf.getvalue()


class _Budget(Exception):
    pass


class _Evaluator:
    def __init__(self, objective, constraints, max_evals):
        self.objective = objective
        self.constraints = list(constraints)
        self.max_evals = max_evals
        self.xs: list[np.ndarray] = []
        self.fs: list[float] = []
        self.cs: list[np.ndarray] = []

    def __call__(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        if len(self.fs) >= self.max_evals:
            raise _Budget
        x = np.array(x, dtype=float)
        f = float(self.objective(x))
        c = np.array([float(ci(x)) for ci in self.constraints])
        if not np.isfinite(f) or not np.all(np.isfinite(c)):
            raise OptimizationError(
                f"non-finite value at evaluation {len(self.fs) + 1}: f={f}, c={c.tolist()}, x={x.tolist()}"
            )
        self.xs.append(x)
        self.fs.append(f)
        self.cs.append(c)
        return f, c

    def result(self, status: str) -> OptimizationResult:
        viol = [float(max(0.0, -c.min())) if c.size else 0.0 for c in self.cs]
        feasible = [i for i, v in enumerate(viol) if v <= 1e-6]
        if feasible:
            best = min(feasible, key=lambda i: (self.fs[i], i))
        else:
            best = min(range(len(viol)), key=lambda i: (viol[i], self.fs[i]))
        return OptimizationResult(
            x_best=self.xs[best].copy(),
            f_best=self.fs[best],
            n_evals=len(self.fs),
            history=[(i + 1, f) for i, f in enumerate(self.fs)],
            violations=viol,
            status=status,
        )


# -- trust-region subproblem ------------------------------------------------


def _independent(A: np.ndarray) -> bool:
    return A.shape[0] == 0 or np.linalg.matrix_rank(A) == A.shape[0]


def _affine_min_norm(A_S: np.ndarray, b_S: np.ndarray, n: int) -> np.ndarray:
    if A_S.shape[0] == 0:
        return np.zeros(n)
    return A_S.T @ np.linalg.solve(A_S @ A_S.T, b_S)


def _subsets(m: int, n: int):
    for size in range(min(m, n) + 1):
        yield from combinations(range(m), size)


def _min_norm_point(A: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """Closest point to the origin of {d : A d >= b}, or None if empty."""
    n = A.shape[1]
    best = None
    for S in _subsets(A.shape[0], n):
        S = list(S)
        if not _independent(A[S]):
            continue
        d = _affine_min_norm(A[S], b[S], n)
        if np.all(A @ d >= b - 1e-12 * (1 + np.abs(b))):
            if best is None or d @ d < best @ best:
                best = d
    return best


def _linear_min_in_ball(g: np.ndarray, A: np.ndarray, b: np.ndarray, rho: float) -> np.ndarray | None:
    """Minimize g.d over {A d >= b, |d| <= rho}.

    A linear objective attains its minimum at an extreme point of the
    feasible set, and every extreme point is either a polyhedron vertex or
    the ball-constrained minimizer on the affine hull of some face, so
    minimizing over those candidates is exact.
    """
    n = g.size
    best, best_val = None, np.inf
    tol = 1e-10 * (1 + np.abs(b)) if b.size else b
    for S in _subsets(A.shape[0], n):
        S = list(S)
        A_S = A[S]
        if not _independent(A_S):
            continue
        d0 = _affine_min_norm(A_S, b[S], n)
        r2 = rho * rho - d0 @ d0
        if r2 < -1e-12 * rho * rho:
            continue
        cands = []
        if len(S) == n:
            cands.append(d0)
        else:
            if A_S.shape[0]:
                Q, _ = np.linalg.qr(A_S.T)
                pg = g - Q @ (Q.T @ g)
            else:
                pg = g
            norm = np.linalg.norm(pg)
            if norm > 1e-14 * max(1.0, np.linalg.norm(g)):
                cands.append(d0 - np.sqrt(max(r2, 0.0)) * pg / norm)
            cands.append(d0)
        for d in cands:
            if A.shape[0] and not np.all(A @ d >= b - tol):
                continue
            val = g @ d
            if best is None or val < best_val - 1e-15 * max(1.0, abs(best_val)):
                best, best_val = d, val
    return best


def _trust_region_step(g: np.ndarray, A: np.ndarray, c: np.ndarray, rho: float) -> tuple[np.ndarray, bool]:
    """Step for the linear models f + g.d and c + A d >= 0.

    First the greatest linearized violation is minimized over the ball, then
    the objective model is minimized while holding that violation level.
    Returns the step and whether it lies on the trust-region boundary.
    """
    n = g.size
    if A.shape[0] == 0:
        norm = np.linalg.norm(g)
        if norm == 0:
            return np.zeros(n), False
        return -rho * g / norm, True

    def feasible(t):
        d = _min_norm_point(A, -c - t)
        return d is not None and d @ d <= rho * rho

    t_hi = max(0.0, float(-c.min()))
    if feasible(0.0):
        t_star = 0.0
    else:
        t_lo = 0.0
        for _ in range(60):
            mid = 0.5 * (t_lo + t_hi)
            if feasible(mid):
                t_hi = mid
            else:
                t_lo = mid
            if t_hi - t_lo <= 1e-13 * max(1.0, t_hi):
                break
        t_star = t_hi
    d = _linear_min_in_ball(g, A, -c - t_star, rho)
    if d is None:
        d = _min_norm_point(A, -c - t_star)
        if d is None:
            d = np.zeros(n)
    return d, bool(np.linalg.norm(d) >= rho * (1 - 1e-9))


# -- main driver ------------------------------------------------------------


def cobyla_minimize(
    objective: Objective,
    x0,
    constraints: Sequence[Constraint] = (),
    config: OptimizerConfig | None = None,
) -> OptimizationResult:
    """Minimize ``objective`` subject to ``c(x) >= 0`` for every constraint.

    Stops when the trust radius reaches ``rho_end`` (status ``"converged"``)
    or after ``max_evals`` evaluations (status ``"max_evals"``, best point so
    far returned).
    """
    config = config or OptimizerConfig()
    if config.method == "nelder-mead":
        return nelder_mead_minimize(objective, x0, constraints, config)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    n = x0.size
    if config.max_evals < n + 2:
        raise ValueError(f"max_evals must be at least dimension + 2 = {n + 2}")
    ev = _Evaluator(objective, constraints, config.max_evals)
    try:
        _cobyla_loop(ev, x0, config)
    except _Budget:
        return ev.result("max_evals")
    return ev.result("converged")


def _cobyla_loop(ev: _Evaluator, x0: np.ndarray, config: OptimizerConfig) -> None:
    n = x0.size
    rho = float(config.rho_begin)
    rho_end = float(config.rho_end)
    delta = rho  # trust radius, never below rho
    mu = 0.0

    def violation(c):
        return float(max(0.0, -c.min())) if c.size else 0.0

    fp, cp = ev(x0)
    pivot = x0.copy()
    # column j of sim is the displacement of vertex j from the pivot
    sim = np.eye(n) * rho
    fv = np.empty(n)
    cv = [None] * n
    for j in range(n):
        x = pivot.copy()
        x[j] += rho
        fv[j], cv[j] = ev(x)
    simi = np.linalg.inv(sim)
    allow_step = True

    while True:
        # move the best vertex by merit into the pivot position
        best, best_phi, best_r = -1, fp + mu * violation(cp), violation(cp)
        for j in range(n):
            rj = violation(cv[j])
            phij = fv[j] + mu * rj
            if phij < best_phi or (phij == best_phi and mu == 0 and rj < best_r):
                best, best_phi, best_r = j, phij, rj
        if best >= 0:
            db = sim[:, best].copy()
            pivot = pivot + db
            sim = sim - db[:, None]
            sim[:, best] = -db
            fv[best], fp = fp, fv[best]
            cv[best], cp = cp, cv[best]
            simi = np.linalg.inv(sim)

        # linear models interpolating the simplex
        g = simi.T @ (fv - fp)
        if cp.size:
            A = (simi.T @ np.array([cv[j] - cp for j in range(n)])).T
        else:
            A = np.zeros((0, n))

        parsig = _ALPHA * delta
        pareta = _BETA * delta
        vsig = 1.0 / np.sqrt((simi**2).sum(axis=1))
        veta = np.sqrt((sim**2).sum(axis=0))
        acceptable = bool(np.all(vsig >= parsig) and np.all(veta <= pareta))

        if not allow_step and not acceptable:
            # geometry step: move the vertex that spoils the simplex
            far = np.nonzero(veta > pareta)[0]
            l = int(far[np.argmax(veta[far])]) if far.size else int(np.argmin(vsig))
            dx = _GAMMA * delta * vsig[l] * simi[l]
            pred_f = g @ dx
            cvmaxp = cvmaxm = 0.0
            if cp.size:
                lin = A @ dx
                cvmaxp = max(0.0, float(np.max(-lin - cp)))
                cvmaxm = max(0.0, float(np.max(lin - cp)))
            if mu * (cvmaxp - cvmaxm) > -2 * pred_f:
                dx = -dx
            fv[l], cv[l] = ev(pivot + dx)
            sim[:, l] = dx
            simi = np.linalg.inv(sim)
            allow_step = True
            continue

        d, on_boundary = _trust_region_step(g, A, cp, delta)
        dnorm = float(np.linalg.norm(d))
        good = False
        if not on_boundary and dnorm < 0.5 * rho:
            delta = rho
        else:
            res_new = float(max(0.0, np.max(-(cp + A @ d)))) if cp.size else 0.0
            pred_f = float(g @ d)
            prerec = violation(cp) - res_new
            barmu = pred_f / prerec if prerec > 0 else 0.0
            if mu < 1.5 * barmu:
                mu = 2.0 * barmu
                phi_p = fp + mu * violation(cp)
                if any(fv[j] + mu * violation(cv[j]) < phi_p for j in range(n)):
                    continue
            prerem = mu * prerec - pred_f

            fn, cn = ev(pivot + d)
            trured = (fp + mu * violation(cp)) - (fn + mu * violation(cn))
            if mu == 0 and fn == fp:
                prerem = prerec
                trured = violation(cp) - violation(cn)
            ratio = trured / prerem if prerem > 0 else -1.0

            if config.adaptive_radius:
                if ratio <= 0.1:
                    delta = 0.5 * delta
                elif ratio <= 0.7:
                    delta = max(0.5 * delta, dnorm)
                else:
                    delta = max(0.5 * delta, 2.0 * dnorm)
                if delta <= 1.5 * rho:
                    delta = rho

            # vertex to drop; replacement is mandatory when the merit improved
            lam = np.abs(simi @ d)
            thresh = 1.0 if trured <= 0 else 0.0
            jdrop = -1
            for j in range(n):
                if lam[j] > thresh:
                    jdrop, thresh = j, lam[j]
            sigbar = lam * vsig
            edgmax = _DELTA * delta
            l = -1
            for j in range(n):
                if sigbar[j] >= parsig or sigbar[j] >= vsig[j]:
                    dist = veta[j] if trured <= 0 else float(np.linalg.norm(d - sim[:, j]))
                    if dist > edgmax:
                        l, edgmax = j, dist
            if l >= 0:
                jdrop = l
            if jdrop >= 0:
                sim[:, jdrop] = d
                fv[jdrop], cv[jdrop] = fn, cn
                simi = np.linalg.inv(sim)
                good = trured > 0 and ratio >= 0.1

        if good:
            allow_step = True
            continue
        if not acceptable:
            allow_step = False
            continue
        if delta > rho:
            allow_step = True
            continue
        # the model cannot make progress at this resolution
        if rho <= rho_end:
            return
        rho_old = rho
        rho = 0.5 * rho
        if rho <= 1.5 * rho_end:
            rho = rho_end
        delta = max(0.5 * rho_old, rho) if config.adaptive_radius else rho
        if mu > 0 and cp.size:
            mu = _reduce_penalty(mu, fp, cp, fv, cv)
        allow_step = True


def _reduce_penalty(mu, fp, cp, fv, cv) -> float:
    """Powell's reset of the penalty parameter when rho shrinks."""
    m = cp.size
    denom = 0.0
    rows = [np.append(cp, fp)] + [np.append(cv[j], fv[j]) for j in range(len(fv))]
    data = np.array(rows)  # vertices x (m + 1)
    cmin = cmax = 0.0
    for k in range(m + 1):
        cmin = float(data[:, k].min())
        cmax = float(data[:, k].max())
        if k < m and cmin < 0.5 * cmax:
            temp = max(cmax, 0.0) - cmin
            denom = temp if denom <= 0 else min(denom, temp)
    # cmin/cmax now refer to the objective column
    if denom == 0:
        return 0.0
    if cmax - cmin < mu * denom:
        return (cmax - cmin) / denom
    return mu


def nelder_mead_minimize(
    objective: Objective,
    x0,
    constraints: Sequence[Constraint] = (),
    config: OptimizerConfig | None = None,
) -> OptimizationResult:
    """Simplex-reflection alternative behind the same interface.

    Constraints enter through a quadratic exterior penalty.
    """
    from scipy.optimize import minimize

    config = config or OptimizerConfig(method="nelder-mead")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    ev = _Evaluator(objective, constraints, config.max_evals)

    def penalized(x):
        f, c = ev(x)
        return f + 1e6 * float(np.sum(np.minimum(c, 0.0) ** 2))

    simplex = np.vstack([x0] + [x0 + config.rho_begin * e for e in np.eye(x0.size)])
    try:
        minimize(
            penalized,
            x0,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "xatol": config.rho_end,
                "fatol": 1e-12,
                "maxfev": config.max_evals,
                "maxiter": 100 * config.max_evals,
            },
        )
    except _Budget:
        return ev.result("max_evals")
    return ev.result("max_evals" if len(ev.fs) >= config.max_evals else "converged")
