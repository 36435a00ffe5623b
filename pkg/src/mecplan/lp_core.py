"""Dense two-phase primal simplex for small and medium linear programs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

LE, EQ, GE = "<=", "=", ">="

FEAS_ABS_TOL = 1e-7
FEAS_REL_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
STALL_LIMIT = 50


@dataclass
class Constraint:
    coeffs: dict[int, float]
    sense: str
    rhs: float
    name: str = ""


@dataclass
class LpProblem:
    """``min c.x`` subject to linear rows and box bounds (``lo`` finite, default 0)."""

    objective: list[float] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    lower: list[float] = field(default_factory=list)
    upper: list[float] = field(default_factory=list)
    names: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.objective)

    def add_var(self, cost: float = 0.0, lo: float = 0.0, hi: float = math.inf, name: str = "") -> int:
        self.objective.append(float(cost))
        self.lower.append(float(lo))
        self.upper.append(float(hi))
        self.names.append(name or f"x{len(self.objective) - 1}")
        return len(self.objective) - 1

    def add_constraint(self, coeffs: Mapping[int, float], sense: str, rhs: float, name: str = "") -> int:
        if sense not in (LE, EQ, GE):
            raise ValueError(f"bad relation {sense!r}")
        merged: dict[int, float] = {}
        for j, a in coeffs.items():
            if not 0 <= j < self.n:
                raise IndexError(f"variable index {j} out of range")
            merged[j] = merged.get(j, 0.0) + float(a)
        self.constraints.append(Constraint(merged, sense, float(rhs), name or f"r{len(self.constraints)}"))
        return len(self.constraints) - 1

    @classmethod
    def from_dense(cls, c, rows, senses, rhs, lower=None, upper=None) -> "LpProblem":
        p = cls()
        n = len(c)
        lower = [0.0] * n if lower is None else lower
        upper = [math.inf] * n if upper is None else upper
        for j in range(n):
            p.add_var(c[j], lower[j], upper[j])
        for row, s, b in zip(rows, senses, rhs):
            p.add_constraint({j: a for j, a in enumerate(row) if a != 0}, s, b)
        return p

    def validate(self) -> None:
        if not (len(self.lower) == len(self.upper) == self.n):
            raise ValueError("bounds length mismatch")
        vals = list(self.objective) + [c.rhs for c in self.constraints]
        vals += [a for c in self.constraints for a in c.coeffs.values()]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("non-finite coefficient")
        for j, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if not math.isfinite(lo):
                raise ValueError(f"variable {j} needs a finite lower bound")
            if hi < lo:
                raise ValueError(f"variable {j} has empty bounds")


@dataclass
class LpSolution:
    status: str
    x: np.ndarray
    objective: float
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def dump_lp(p: LpProblem) -> str:
    """Row-oriented text form of a problem (CPLEX-LP flavoured) for cross-checking."""

    def expr(coeffs) -> str:
        terms = [f"{a:+.17g} {p.names[j]}" for j, a in sorted(coeffs.items())]
        return " ".join(terms) if terms else "0"

    lines = ["minimize", f"  obj: {expr(dict(enumerate(p.objective)))}", "subject to"]
    for c in p.constraints:
        lines.append(f"  {c.name}: {expr(c.coeffs)} {c.sense} {c.rhs:.17g}")
    lines.append("bounds")
    for j in range(p.n):
        lines.append(f"  {p.lower[j]:.17g} <= {p.names[j]} <= {p.upper[j]:.17g}")
    lines.append("end")
    return "\n".join(lines) + "\n"


class _Tableau:
    def __init__(self, a: np.ndarray, b: np.ndarray, basis: list[int]):
        m, ncol = a.shape
        self.t = np.zeros((m + 1, ncol + 1))
        self.t[:m, :ncol] = a
        self.t[:m, ncol] = b
        self.basis = basis
        self.iterations = 0

    @property
    def m(self) -> int:
        return self.t.shape[0] - 1

    def pivot(self, r: int, c: int) -> None:
        t = self.t
        t[r] /= t[r, c]
        col = t[:, c].copy()
        col[r] = 0.0
        t -= np.outer(col, t[r])
        t[:, c] = 0.0
        t[r, c] = 1.0
        self.basis[r] = c
        self.iterations += 1

    def run(self, allowed: np.ndarray, max_iter: int) -> str:
        """Iterate until optimal or unbounded over the columns flagged in ``allowed``."""
        t = self.t
        scale = max(1.0, float(np.abs(t[-1, :-1]).max(initial=0.0)))
        opt_tol = OPT_TOL * scale
        stall = 0
        while True:
            d = np.where(allowed, t[-1, :-1], 0.0)
            bland = stall >= STALL_LIMIT
            if bland:
                cand = np.flatnonzero(d < -opt_tol)
                if cand.size == 0:
                    return OPTIMAL
                c = int(cand[0])
            else:
                c = int(np.argmin(d))
                if d[c] >= -opt_tol:
                    return OPTIMAL
            col = t[:-1, c]
            rows = np.flatnonzero(col > PIVOT_TOL)
            if rows.size == 0:
                return UNBOUNDED
            ratios = t[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            if bland:
                r = int(min(ties, key=lambda i: self.basis[i]))
            else:
                r = int(ties[np.argmax(col[ties])])
            stall = stall + 1 if best <= FEAS_ABS_TOL else 0
            self.pivot(r, c)
            if self.iterations > max_iter:
                raise RuntimeError("simplex iteration limit exceeded")


def solve_lp(p: LpProblem) -> LpSolution:
    """Solve ``p`` to an optimal basic feasible solution.

    Pricing is Dantzig's largest-reduced-cost rule, switching to Bland's rule
    after a run of degenerate pivots so the method cannot cycle.
    """
    p.validate()
    n = p.n
    lo = np.asarray(p.lower, dtype=float)
    hi = np.asarray(p.upper, dtype=float)
    c = np.asarray(p.objective, dtype=float)

    rows: list[tuple[dict[int, float], str, float]] = []
    for con in p.constraints:
        shift = sum(a * lo[j] for j, a in con.coeffs.items())
        rows.append((con.coeffs, con.sense, con.rhs - shift))
    for j in range(n):
        if math.isfinite(hi[j]):
            rows.append(({j: 1.0}, LE, hi[j] - lo[j]))

    m = len(rows)
    n_slack = sum(1 for _, s, _ in rows if s != EQ)
    n_art = sum(1 for _, s, b in rows if s == EQ or (s == LE) == (b < 0))
    ncol = n + n_slack + n_art
    a = np.zeros((m, ncol))
    b = np.zeros(m)
    basis = [0] * m
    k_slack, k_art = n, n + n_slack
    for i, (coeffs, sense, rhs) in enumerate(rows):
        sign = -1.0 if rhs < 0 else 1.0
        for j, v in coeffs.items():
            a[i, j] = sign * v
        b[i] = sign * rhs
        if sense != EQ:
            a[i, k_slack] = sign * (1.0 if sense == LE else -1.0)
            k_slack += 1
            if a[i, k_slack - 1] > 0:
                basis[i] = k_slack - 1
                continue
        a[i, k_art] = 1.0
        basis[i] = k_art
        k_art += 1
    a_std, b_std = a.copy(), b.copy()
    max_iter = 50 * (m + ncol) + 1000

    tab = _Tableau(a, b, basis)
    art = np.zeros(ncol, dtype=bool)
    art[n + n_slack:] = True
    if n_art:
        tab.t[-1, :] = -tab.t[:m, :].sum(axis=0, where=art[basis][:, None])
        tab.t[-1, np.flatnonzero(art)] = 0.0
        tab.run(np.ones(ncol, dtype=bool), max_iter)
        infeas = -tab.t[-1, -1]
        if infeas > FEAS_ABS_TOL + FEAS_REL_TOL * max(1.0, float(np.abs(b_std).max(initial=0.0))):
            return LpSolution(INFEASIBLE, np.full(n, np.nan), math.nan, tab.iterations)
        _drive_out_artificials(tab, art)

    keep = np.ones(tab.m, dtype=bool)
    # rows whose artificial could not be pivoted out are redundant
    for i, bv in enumerate(tab.basis):
        if art[bv]:
            keep[i] = False
    if not keep.all():
        t = tab.t
        tab.t = np.vstack([t[:-1][keep], t[-1:]])
        tab.basis = [bv for i, bv in enumerate(tab.basis) if keep[i]]
        a_std, b_std = a_std[keep], b_std[keep]

    cost = np.zeros(ncol)
    cost[:n] = c
    cb = cost[tab.basis]
    tab.t[-1, :-1] = cost - cb @ tab.t[:-1, :-1]
    tab.t[-1, -1] = -cb @ tab.t[:-1, -1]
    tab.t[-1, np.flatnonzero(art)] = 0.0
    status = tab.run(~art, max_iter)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, np.full(n, np.nan), -math.inf, tab.iterations)

    xs = np.zeros(ncol)
    xs[tab.basis] = tab.t[:-1, -1]
    xs = _refine(a_std, b_std, tab.basis, xs)
    x = lo + xs[:n]
    x = np.where(np.abs(x) < 1e-12, 0.0, x)
    return LpSolution(OPTIMAL, x, float(c @ x), tab.iterations)


def _drive_out_artificials(tab: _Tableau, art: np.ndarray) -> None:
    for i in range(tab.m):
        if not art[tab.basis[i]]:
            continue
        row = np.where(art, 0.0, np.abs(tab.t[i, :-1]))
        j = int(np.argmax(row))
        if row[j] > PIVOT_TOL:
            tab.pivot(i, j)


def _refine(a: np.ndarray, b: np.ndarray, basis: list[int], xs: np.ndarray) -> np.ndarray:
    """Recompute basic values from the original rows to shed accumulated pivot error."""
    if not basis:
        return xs
    bm = a[:, basis]
    try:
        xb = np.linalg.solve(bm, b)
    except np.linalg.LinAlgError:
        return np.maximum(xs, 0.0)
    if not np.all(np.isfinite(xb)) or np.abs(xb - xs[basis]).max() > 1e-6 * max(1.0, np.abs(xb).max()):
        return np.maximum(xs, 0.0)
    out = xs.copy()
    out[basis] = np.maximum(xb, 0.0)
    return out


@dataclass(frozen=True)
class Violation:
    kind: str
    index: int
    amount: float


def verify_solution(p: LpProblem, s: LpSolution, tol: float = 1e-6) -> list[Violation]:
    """List rows, bounds, or objective mismatches that exceed ``tol`` (absolute)."""
    out: list[Violation] = []
    x = np.asarray(s.x, dtype=float)
    for i, con in enumerate(p.constraints):
        lhs = sum(a * x[j] for j, a in con.coeffs.items())
        if con.sense == LE:
            gap = lhs - con.rhs
        elif con.sense == GE:
            gap = con.rhs - lhs
        else:
            gap = abs(lhs - con.rhs)
        if not gap <= tol:
            out.append(Violation("row", i, float(gap)))
    for j in range(p.n):
        under = p.lower[j] - x[j]
        over = x[j] - p.upper[j]
        if not (under <= tol and over <= tol):
            out.append(Violation("bound", j, float(max(under, over))))
    obj = float(np.dot(p.objective, x))
    if not abs(obj - s.objective) <= tol * max(1.0, abs(obj)):
        out.append(Violation("objective", -1, abs(obj - s.objective)))
    return out


def solve_lp_highs(p: LpProblem) -> LpSolution:
    """Same contract as :func:`solve_lp`, delegated to HiGHS through SciPy.

    Meant for provisioning LPs too large for the dense tableau.
    """
    from scipy.optimize import linprog
    from scipy.sparse import csr_matrix

    p.validate()
    n = p.n
    ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
    for con in p.constraints:
        if con.sense == EQ:
            eq_rows.append({j: a for j, a in con.coeffs.items()})
            eq_rhs.append(con.rhs)
        elif con.sense == LE:
            ub_rows.append(con.coeffs)
            ub_rhs.append(con.rhs)
        else:
            ub_rows.append({j: -a for j, a in con.coeffs.items()})
            ub_rhs.append(-con.rhs)

    def sparse(rows):
        if not rows:
            return None
        r = [i for i, row in enumerate(rows) for _ in row]
        c = [j for row in rows for j in row]
        v = [a for row in rows for a in row.values()]
        return csr_matrix((v, (r, c)), shape=(len(rows), n))

    bounds = [(lo, None if math.isinf(hi) else hi) for lo, hi in zip(p.lower, p.upper)]
    res = linprog(p.objective, A_ub=sparse(ub_rows), b_ub=ub_rhs or None, A_eq=sparse(eq_rows),
                  b_eq=eq_rhs or None, bounds=bounds, method="highs")
    if res.status == 2:
        return LpSolution(INFEASIBLE, np.full(n, np.nan), math.nan, int(res.nit))
    if res.status == 3:
        return LpSolution(UNBOUNDED, np.full(n, np.nan), -math.inf, int(res.nit))
    if res.status != 0:
        raise RuntimeError(f"HiGHS failed: {res.message}")
    x = np.where(np.abs(res.x) < 1e-12, 0.0, res.x)
    return LpSolution(OPTIMAL, x, float(np.dot(p.objective, x)), int(res.nit))
