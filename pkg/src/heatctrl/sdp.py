"""Dense semidefinite feasibility engine for small block-structured LMIs.

Decision variables are scalars; symmetric matrix variables are registered as
index grids over their upper triangle.  A problem is a list of affine
negative-definite constraints plus positivity blocks, and the engine decides
strict feasibility with a primal-dual path-following method (Nesterov-Todd
scaling) on the aggregated block cone.

Internally every constraint k is normalized by its data scale
s_k = ||constant||_inf + max_j ||coeff_j||_inf, and strict feasibility is a
per-constraint margin of rel_margin * s_k (default 1e-7).  This makes the
Feasible/Infeasible status invariant under rescaling any single constraint.
Phase I minimizes a single slack t over all blocks; the solver exits early as
soon as the candidate point satisfies every original constraint with the
required margin, and a Feasible status is accepted only after the independent
eigenvalue checker confirms it.  Infeasibility is declared only with a primal
ray certificate: a PSD block matrix Z, orthogonal to every coefficient
direction, proving min_x max_k lambda_max >= <C, Z> > 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as sla

SYM_TOL = 1e-12


class SolveStatus(Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    INCONCLUSIVE = "Inconclusive"


def _as_symmetric(mat, name: str) -> np.ndarray:
    m = np.asarray(mat, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.T).max() > SYM_TOL * scale:
        raise ValueError(f"{name} is not symmetric to {SYM_TOL:g} (relative)")
    return 0.5 * (m + m.T)


@dataclass
class LmiConstraint:
    """Affine symmetric-matrix constraint  constant + sum_j x_j coeffs[j] < 0."""

    constant: np.ndarray
    coeffs: dict[int, np.ndarray]
    name: str = ""

    @property
    def dim(self) -> int:
        return self.constant.shape[0]


@dataclass
class PositivityBlock:
    """Matrix variable block (entries indexed by var_ids) required > eps*I."""

    var_ids: np.ndarray
    eps: float
    name: str = ""

    @property
    def dim(self) -> int:
        return self.var_ids.shape[0]


class LmiProblem:
    """Affine LMI feasibility problem over scalar decision variables."""

    def __init__(self):
        self.num_vars = 0
        self.constraints: list[LmiConstraint] = []
        self.positivity: list[PositivityBlock] = []

    def scalar_var(self) -> int:
        idx = self.num_vars
        self.num_vars += 1
        return idx

    def symmetric_var(self, k: int) -> np.ndarray:
        """Register a k x k symmetric matrix variable; returns its index grid."""
        ids = np.zeros((k, k), dtype=int)
        for i in range(k):
            for j in range(i, k):
                ids[i, j] = ids[j, i] = self.scalar_var()
        return ids

    def add_negdef(self, constant, coeffs: dict[int, np.ndarray], name: str = ""):
        constant = _as_symmetric(constant, f"constraint '{name}' constant")
        d = constant.shape[0]
        clean = {}
        for j, mat in coeffs.items():
            j = int(j)
            if not 0 <= j < self.num_vars:
                raise ValueError(f"coefficient index {j} out of range")
            m = _as_symmetric(mat, f"constraint '{name}' coeff[{j}]")
            if m.shape[0] != d:
                raise ValueError(f"coeff[{j}] dimension mismatch in '{name}'")
            if np.any(m):
                clean[j] = m
        self.constraints.append(LmiConstraint(constant, clean, name))

    def require_posdef(self, var_ids, eps: float, name: str = ""):
        ids = np.atleast_2d(np.asarray(var_ids, dtype=int))
        if ids.shape[0] != ids.shape[1] or np.any(ids != ids.T):
            raise ValueError("positivity block needs a symmetric index grid")
        if ids.min() < 0 or ids.max() >= self.num_vars:
            raise ValueError("positivity block index out of range")
        if eps < 0:
            raise ValueError("positivity eps must be nonnegative")
        self.positivity.append(PositivityBlock(ids, float(eps), name))

    # -- evaluation helpers (used by the independent checker and tests) -----

    def eval_constraint(self, k: int, x: np.ndarray) -> np.ndarray:
        con = self.constraints[k]
        m = con.constant.copy()
        for j, mat in con.coeffs.items():
            m += x[j] * mat
        return m

    def eval_positivity(self, k: int, x: np.ndarray) -> np.ndarray:
        return x[self.positivity[k].var_ids].astype(float)

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        """Serialize to the documented JSON schema (row-major matrix data)."""
        doc = {
            "num_vars": self.num_vars,
            "constraints": [
                {
                    "dim": c.dim,
                    "name": c.name,
                    "constant": c.constant.ravel().tolist(),
                    "coeffs": {str(j): m.ravel().tolist()
                               for j, m in sorted(c.coeffs.items())},
                }
                for c in self.constraints
            ],
            "positivity": [
                {
                    "dim": p.dim,
                    "name": p.name,
                    "eps": p.eps,
                    "var_ids": p.var_ids.ravel().tolist(),
                }
                for p in self.positivity
            ],
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LmiProblem":
        doc = json.loads(text)
        prob = cls()
        prob.num_vars = int(doc["num_vars"])
        for c in doc["constraints"]:
            d = int(c["dim"])
            const = np.array(c["constant"], dtype=float).reshape(d, d)
            coeffs = {int(j): np.array(v, dtype=float).reshape(d, d)
                      for j, v in c["coeffs"].items()}
            prob.add_negdef(const, coeffs, c.get("name", ""))
        for p in doc["positivity"]:
            d = int(p["dim"])
            ids = np.array(p["var_ids"], dtype=int).reshape(d, d)
            prob.require_posdef(ids, float(p["eps"]), p.get("name", ""))
        return prob


@dataclass
class SolveOptions:
    max_iter: int = 100
    tol: float = 1e-9
    margin_eps: float | None = None   # absolute strictness; None -> rel_margin*scale
    rel_margin: float = 1e-7
    step_frac: float = 0.98
    verbose: bool = False


@dataclass
class ConstraintCheck:
    name: str
    kind: str          # "negdef" | "posdef"
    extreme_eig: float  # max eig for negdef, min eig for posdef
    ok: bool


@dataclass
class CertificateReport:
    margin: float
    checks: list[ConstraintCheck]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)


@dataclass
class SolveOutcome:
    status: SolveStatus
    point: np.ndarray | None
    margin: float
    iterations: int
    residuals: dict = field(default_factory=dict)


def check_certificate(problem: LmiProblem, point, margin: float) -> CertificateReport:
    """Independent eigenvalue check of a candidate point at a given margin.

    Negative-definite constraints pass when their max eigenvalue is <= -margin;
    positivity blocks pass when their min eigenvalue is >= max(margin, eps).
    """
    x = np.asarray(point, dtype=float)
    if x.shape != (problem.num_vars,):
        raise ValueError(
            f"point has {x.shape} entries, problem has {problem.num_vars} variables")
    checks = []
    for k, con in enumerate(problem.constraints):
        top = float(np.linalg.eigvalsh(problem.eval_constraint(k, x))[-1])
        checks.append(ConstraintCheck(con.name or f"constraint[{k}]", "negdef",
                                      top, top <= -margin))
    for k, blk in enumerate(problem.positivity):
        bot = float(np.linalg.eigvalsh(problem.eval_positivity(k, x))[0])
        checks.append(ConstraintCheck(blk.name or f"positivity[{k}]", "posdef",
                                      bot, bot >= max(margin, blk.eps)))
    return CertificateReport(margin, checks)


# ---------------------------------------------------------------------------
# solver internals
# ---------------------------------------------------------------------------

class _Block:
    """One cone block in normalized units: S = t*I - (C + sum_j x_j A_j)."""

    __slots__ = ("d", "C", "sup", "A", "scale", "req", "name", "kind", "eps")

    def __init__(self, d, C, sup, A, scale, req, name, kind, eps=0.0):
        self.d = d
        self.C = C              # (d, d) normalized constant of G
        self.sup = sup          # (m,) global variable indices
        self.A = A              # (m, d, d) normalized coefficients of G
        self.scale = scale
        self.req = req          # required original-scale margin
        self.name = name
        self.kind = kind        # "negdef" | "posdef"
        self.eps = eps

    def value(self, x: np.ndarray) -> np.ndarray:
        """G(x) in normalized units."""
        g = self.C.copy()
        if self.sup.size:
            g += np.tensordot(x[self.sup], self.A, axes=1)
        return g


def _build_blocks(problem: LmiProblem, opts: SolveOptions) -> list[_Block]:
    blocks = []
    for con in problem.constraints:
        sup = np.array(sorted(con.coeffs), dtype=int)
        A = np.stack([con.coeffs[j] for j in sup]) if sup.size else \
            np.zeros((0, con.dim, con.dim))
        scale = float(np.abs(con.constant).max())
        if sup.size:
            scale += max(float(np.abs(con.coeffs[j]).max()) for j in sup)
        if scale == 0.0:
            raise ValueError(f"constraint '{con.name}' is identically zero")
        req = opts.margin_eps if opts.margin_eps is not None else opts.rel_margin * scale
        blocks.append(_Block(con.dim, con.constant / scale, sup, A / scale,
                             scale, req, con.name, "negdef"))
    for blk in problem.positivity:
        d = blk.dim
        # G = eps*I - P(x): coefficient of each distinct entry variable.
        sup = np.array(sorted(set(blk.var_ids.ravel().tolist())), dtype=int)
        A = np.zeros((sup.size, d, d))
        pos = {j: i for i, j in enumerate(sup)}
        for r in range(d):
            for c in range(d):
                A[pos[blk.var_ids[r, c]], r, c] -= 1.0
        scale = blk.eps + 1.0
        req = opts.margin_eps if opts.margin_eps is not None else opts.rel_margin * scale
        blocks.append(_Block(d, (blk.eps / scale) * np.eye(d), sup, A / scale,
                             scale, req, blk.name, "posdef", blk.eps))
    return blocks


def _original_margins(blocks: list[_Block], x: np.ndarray) -> np.ndarray:
    """Original-scale strictness margin of every block at x (>0 means satisfied)."""
    out = np.empty(len(blocks))
    for i, b in enumerate(blocks):
        out[i] = -float(np.linalg.eigvalsh(b.value(x))[-1]) * b.scale
    return out


def _step_to_boundary(L: np.ndarray, D: np.ndarray) -> float:
    """Largest alpha with X + alpha*D >= 0, where X = L L^T."""
    T = sla.solve_triangular(L, D, lower=True, check_finite=False)
    T = sla.solve_triangular(L, T.T, lower=True, check_finite=False)
    lam_min = float(np.linalg.eigvalsh(0.5 * (T + T.T))[0])
    if lam_min >= 0.0:
        return np.inf
    return -1.0 / lam_min


def _waw(W: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Batched W @ A_i @ W for a stack A of symmetric matrices."""
    m, d, _ = A.shape
    if m == 0:
        return A
    B = (A.reshape(m * d, d) @ W).reshape(m, d, d)
    T = (B.transpose(0, 2, 1).reshape(m * d, d) @ W).reshape(m, d, d)
    return T.transpose(0, 2, 1)


def _chol_with_jitter(H: np.ndarray):
    jitter = 0.0
    base = max(np.trace(H) / max(H.shape[0], 1), 1.0)
    for k in range(6):
        try:
            return np.linalg.cholesky(H + jitter * np.eye(H.shape[0])), jitter
        except np.linalg.LinAlgError:
            jitter = base * 10.0 ** (-14 + 3 * k)
    raise np.linalg.LinAlgError("Newton system factorization failed")


class _RayChecker:
    """Builds equality-corrected primal ray certificates of infeasibility."""

    def __init__(self, blocks, act_vars):
        self.blocks = blocks
        self.act = act_vars               # active variable indices (global)
        self.pos = {j: i for i, j in enumerate(act_vars)}
        n = len(act_vars)
        gram = np.zeros((n, n))
        for b in blocks:
            if not b.sup.size:
                continue
            F = b.A.reshape(b.sup.size, -1)
            idx = np.array([self.pos[j] for j in b.sup])
            gram[np.ix_(idx, idx)] += F @ F.T
        self.ok = n > 0
        if self.ok:
            try:
                self.L, _ = _chol_with_jitter(gram)
            except np.linalg.LinAlgError:
                self.ok = False

    def _project_equalities(self, Z):
        n = len(self.act)
        g = np.zeros(n)
        for b, Zk in zip(self.blocks, Z):
            if b.sup.size:
                idx = np.array([self.pos[j] for j in b.sup])
                g[idx] += b.A.reshape(b.sup.size, -1) @ Zk.ravel()
        mu = sla.cho_solve((self.L, True), g, check_finite=False)
        out = []
        for b, Zk in zip(self.blocks, Z):
            if b.sup.size:
                Zk = Zk - np.tensordot(mu[[self.pos[j] for j in b.sup]],
                                       b.A, axes=1)
            out.append(0.5 * (Zk + Zk.T))
        return out, g

    def certify(self, X: list[np.ndarray]):
        """Return a certified lower bound on t* (or None if no certificate).

        The iterate is projected onto the homogeneous equality subspace and
        trace-normalized.  The ray is accepted only when its value dominates
        both numerical defects by wide relative factors (equality residual
        below 1e-7 * value, PSD violation below 1e-4 * value, value at least
        1e-8 in data-normalized units, i.e. an order above the feasibility
        margin), so boundary noise stays Inconclusive; the recorded bound is
        recomputed after rounding the ray to exactly PSD.
        """
        if not self.ok:
            return None
        Z, _ = self._project_equalities([Xk.copy() for Xk in X])
        tr = sum(np.trace(Zk) for Zk in Z)
        if tr <= 1e-12:
            return None
        Z = [Zk / tr for Zk in Z]
        lam_min = min(float(np.linalg.eigvalsh(Zk)[0]) for Zk in Z)
        val = sum(float(np.sum(b.C * Zk)) for b, Zk in zip(self.blocks, Z))
        _, g_after = self._project_equalities(Z)
        resid = float(np.abs(g_after).max()) if len(self.act) else 0.0
        if (val < 1e-8 or resid > max(1e-12, 1e-7 * val)
                or lam_min < -1e-4 * val):
            return None
        if lam_min < 0.0:
            for k, Zk in enumerate(Z):
                w, V = np.linalg.eigh(Zk)
                if w[0] < 0.0:
                    Z[k] = (V * np.clip(w, 0.0, None)) @ V.T
            val = sum(float(np.sum(b.C * Zk)) for b, Zk in zip(self.blocks, Z))
            if val <= 0.0:
                return None
        return val


def solve_feasibility(problem: LmiProblem,
                      options: SolveOptions | None = None) -> SolveOutcome:
    """Decide strict feasibility of an LmiProblem.

    Returns Feasible only when the independent checker confirms the point at
    the per-constraint margins; Infeasible only with a ray certificate; and
    Inconclusive on iteration cap, stall, or a borderline problem.
    """
    opts = options or SolveOptions()
    blocks = _build_blocks(problem, opts)
    nv = problem.num_vars

    if not blocks:
        return SolveOutcome(SolveStatus.FEASIBLE, np.zeros(nv), np.inf, 0,
                            {"note": "no constraints"})

    act = sorted({int(j) for b in blocks for j in b.sup})
    x_full = np.zeros(nv)

    def margins_ok(xf):
        m = _original_margins(blocks, xf)
        return m, bool(np.all(m >= [b.req for b in blocks]))

    if not act:
        # Constant problem: no variables appear anywhere.
        marg, ok = margins_ok(x_full)
        status = SolveStatus.FEASIBLE if ok else SolveStatus.INFEASIBLE
        return SolveOutcome(status, x_full if ok else None, float(marg.min()), 0,
                            {"note": "constant problem"})

    pos = {j: i for i, j in enumerate(act)}
    n = len(act) + 1                      # active variables plus the slack t
    it_t = n - 1

    # Stack per-block coefficient tensors with the slack column appended.
    stacks = []
    for b in blocks:
        idx = np.array([pos[j] for j in b.sup] + [it_t], dtype=int)
        A = np.concatenate([b.A, -np.eye(b.d)[None]], axis=0)
        stacks.append((idx, A, A.reshape(A.shape[0], -1)))

    D_total = sum(b.d for b in blocks)
    b_vec = np.zeros(n)
    b_vec[it_t] = -1.0

    x = np.zeros(len(act))
    t0 = max(float(np.linalg.eigvalsh(b.value(x_full))[-1]) for b in blocks) + 1.0
    y = np.concatenate([x, [t0]])
    X = [np.eye(b.d) / D_total for b in blocks]
    S = [(t0 + 1.0) * np.eye(b.d) - b.value(x_full) for b in blocks]

    ray = _RayChecker(blocks, act)
    best_margin = -np.inf
    stall = 0
    mu = np.inf

    for it in range(1, opts.max_iter + 1):
        x_full[act] = y[:-1]
        marg, ok = margins_ok(x_full)
        best_margin = max(best_margin, float(marg.min()))
        if ok:
            report = check_certificate(problem, x_full,
                                       0.5 * min(b.req for b in blocks))
            if report.ok:
                return SolveOutcome(SolveStatus.FEASIBLE, x_full.copy(),
                                    float(marg.min()), it - 1,
                                    {"mu": mu, "best_margin": best_margin})
        # ray checks are worthwhile once the iterate has settled a little
        if it >= 3 and (it % 2 == 1 or mu < 1e-5):
            lb = ray.certify(X)
            if lb is not None:
                return SolveOutcome(
                    SolveStatus.INFEASIBLE, None, float(best_margin), it - 1,
                    {"certified_lower_bound": lb, "mu": mu})

        # Residuals.
        Svals = [b.value(x_full) for b in blocks]
        Rd = [y[it_t] * np.eye(b.d) - G - Sk
              for b, G, Sk in zip(blocks, Svals, S)]
        rp = b_vec.copy()
        for (idx, A, Aflat), Xk in zip(stacks, X):
            rp[idx] -= Aflat @ Xk.ravel()
        mu = sum(float(np.sum(Xk * Sk)) for Xk, Sk in zip(X, S)) / D_total
        # polish well below tol so near-boundary ray certificates sharpen
        if mu < opts.tol * 1e-4 and np.abs(rp).max() < opts.tol:
            break

        # Nesterov-Todd scaling per block.
        try:
            W, Sinv, Lx, Ls = [], [], [], []
            for Xk, Sk in zip(X, S):
                lx = np.linalg.cholesky(Xk)
                ls = np.linalg.cholesky(Sk)
                U, sv, Vt = np.linalg.svd(ls.T @ lx)
                G = lx @ Vt.T / np.sqrt(sv)
                W.append(G @ G.T)
                Sinv.append(sla.cho_solve((ls, True), np.eye(Sk.shape[0]), check_finite=False))
                Lx.append(lx)
                Ls.append(ls)
        except np.linalg.LinAlgError:
            break

        H = np.zeros((n, n))
        WAW = []
        for (idx, A, Aflat), Wk in zip(stacks, W):
            T = _waw(Wk, A)
            WAW.append(T)
            H[np.ix_(idx, idx)] += Aflat @ T.reshape(T.shape[0], -1).T
        H = 0.5 * (H + H.T)
        try:
            LH, _ = _chol_with_jitter(H)
        except np.linalg.LinAlgError:
            break

        def solve_direction(Rc):
            rhs = rp.copy()
            for (idx, A, Aflat), Wk, Rck, Rdk in zip(stacks, W, Rc, Rd):
                rhs[idx] -= Aflat @ (Rck - Wk @ Rdk @ Wk).ravel()
            dy = sla.cho_solve((LH, True), rhs, check_finite=False)
            dS, dX = [], []
            for (idx, A, Aflat), Wk, Rck, Rdk in zip(stacks, W, Rc, Rd):
                dSk = Rdk - np.tensordot(dy[idx], A, axes=1)
                dXk = Rck - Wk @ dSk @ Wk
                dS.append(0.5 * (dSk + dSk.T))
                dX.append(0.5 * (dXk + dXk.T))
            return dy, dX, dS

        def max_steps(dX, dS):
            ap = ad = 1.0
            for Xk, Sk, dXk, dSk, lx, ls in zip(X, S, dX, dS, Lx, Ls):
                ap = min(ap, opts.step_frac * _step_to_boundary(lx, dXk))
                ad = min(ad, opts.step_frac * _step_to_boundary(ls, dSk))
            return min(ap, 1.0), min(ad, 1.0)

        # Predictor.
        Rc = [-Xk for Xk in X]
        dy_a, dX_a, dS_a = solve_direction(Rc)
        ap_a, ad_a = max_steps(dX_a, dS_a)
        mu_aff = sum(float(np.sum((Xk + ap_a * dXk) * (Sk + ad_a * dSk)))
                     for Xk, Sk, dXk, dSk in zip(X, S, dX_a, dS_a)) / D_total
        sigma = float(np.clip((max(mu_aff, 0.0) / mu) ** 3, 1e-6, 0.99))

        # Corrector with the Mehrotra second-order term.
        Rc = []
        for Xk, Sk, dXk, dSk, Sik in zip(X, S, dX_a, dS_a, Sinv):
            T = dXk @ (dSk @ Sik)
            Rc.append(sigma * mu * Sik - Xk - 0.5 * (T + T.T))
        dy, dX, dS = solve_direction(Rc)
        ap, ad = max_steps(dX, dS)

        for _ in range(40):
            Xn = [Xk + ap * dXk for Xk, dXk in zip(X, dX)]
            Sn = [Sk + ad * dSk for Sk, dSk in zip(S, dS)]
            try:
                for M in (*Xn, *Sn):
                    np.linalg.cholesky(0.5 * (M + M.T))
                break
            except np.linalg.LinAlgError:
                ap *= 0.5
                ad *= 0.5
        else:
            break
        X = [0.5 * (M + M.T) for M in Xn]
        S = [0.5 * (M + M.T) for M in Sn]
        y = y + ad * dy

        if opts.verbose:
            print(f"  iter {it:3d}  mu={mu:.3e}  t={y[it_t]:+.3e}  "
                  f"margin={best_margin:+.3e}  steps=({ap:.2f},{ad:.2f})")
        stall = stall + 1 if max(ap, ad) < 1e-4 else 0
        if stall >= 3:
            break

    x_full[act] = y[:-1]
    marg, ok = margins_ok(x_full)
    if ok:
        report = check_certificate(problem, x_full, 0.5 * min(b.req for b in blocks))
        if report.ok:
            return SolveOutcome(SolveStatus.FEASIBLE, x_full.copy(),
                                float(marg.min()), opts.max_iter,
                                {"mu": mu, "best_margin": best_margin})
    lb = ray.certify(X)
    if lb is not None:
        return SolveOutcome(SolveStatus.INFEASIBLE, None, float(best_margin),
                            opts.max_iter, {"certified_lower_bound": lb})
    return SolveOutcome(SolveStatus.INCONCLUSIVE, None, float(marg.min()),
                        opts.max_iter,
                        {"mu": mu, "best_margin": best_margin})
