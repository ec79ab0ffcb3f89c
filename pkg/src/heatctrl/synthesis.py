"""Gain design, closed-loop matrices, stability LMIs and the Halanay rate.

The observer gain L0 and controller gain K0 come from small Lyapunov-type
LMIs solved with the built-in engine (sdp module); the full-order continuous
and sampled-data stability conditions are assembled here as affine LMI
problems over (P, alpha1) and (P, W1, W2, alpha1, alpha2) respectively.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import sdp
from .errors import SynthesisError
from .modal import ModalModel, eigenvalue

log = logging.getLogger(__name__)

DEFAULT_MARGIN_REQ = 1e-6


@dataclass
class GainSet:
    """Observer/controller gains with their Lyapunov certificates."""

    L0: np.ndarray       # (N0, 1)
    K0: np.ndarray       # (1, N0+1)
    Po: np.ndarray       # (N0, N0) > 0
    Pc: np.ndarray       # (N0+1, N0+1) > 0
    margin: float        # smallest certified eigenvalue gap of the two designs


@dataclass
class ClosedLoopMatrices:
    """All coupled-system matrices for a given model and gain set.

    The state ordering is col{w_hat^{N0+1 incl. u}, e^{N0}, w_hat^{N-N0},
    e^{N-N0}} of total dimension 2N+1.
    """

    N0: int
    N: int
    F: np.ndarray        # (2N+1, 2N+1)
    Lcal: np.ndarray     # (2N+1, 1)
    Ktilde: np.ndarray   # (1, 2N+1)
    F1: np.ndarray       # (2N+1, 2N+1)
    Bcal: np.ndarray     # (2N+1, 1)
    Khat: np.ndarray     # (1, 2N+1)
    Ltilde: np.ndarray   # (N0+1, 1)
    a_row: np.ndarray    # (1, N0+1)

    @property
    def dim(self) -> int:
        return 2 * self.N + 1

    def block_slices(self):
        n0, n = self.N0, self.N
        edges = np.cumsum([0, n0 + 1, n0, n - n0, n - n0])
        return [slice(edges[i], edges[i + 1]) for i in range(4)]

    def diagonal_blocks(self):
        return [self.F[s, s] for s in self.block_slices()]

    def spectral_abscissa(self) -> float:
        return float(np.max(np.linalg.eigvals(self.F).real))


@dataclass
class LmiCertificate:
    """Feasible point of a stability LMI, with its certified margin."""

    P: np.ndarray
    alpha1: float
    margin: float
    alpha2: float | None = None
    W1: np.ndarray | None = None
    W2: float | None = None


@dataclass
class BuiltLmi:
    problem: sdp.LmiProblem
    vars: dict

    def certificate(self, outcome: sdp.SolveOutcome) -> LmiCertificate | None:
        if outcome.status is not sdp.SolveStatus.FEASIBLE:
            return None
        x = outcome.point
        v = self.vars
        return LmiCertificate(
            P=x[v["P"]].astype(float),
            alpha1=float(x[v["alpha1"]]),
            alpha2=float(x[v["alpha2"]]) if "alpha2" in v else None,
            W1=x[v["W1"]].astype(float) if "W1" in v else None,
            W2=float(x[v["W2"]]) if "W2" in v else None,
            margin=outcome.margin,
        )


@dataclass
class GainReport:
    """verify_gains output: recomputed inequalities and spectra."""

    obs_lyap_max: float      # max eig of Po(A0-L0C0)+(.)^T Po + 2 delta Po
    ctrl_lyap_max: float
    obs_abscissa: float      # spectral abscissa of A0 - L0 C0
    ctrl_abscissa: float
    delta: float
    margin: float
    obs_ok: bool
    ctrl_ok: bool

    @property
    def ok(self) -> bool:
        return self.obs_ok and self.ctrl_ok


def controllability_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    cols = [B]
    for _ in range(n - 1):
        cols.append(A @ cols[-1])
    return np.hstack(cols)


def observability_matrix(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    return controllability_matrix(A.T, C.T).T


def _sym_entry_rows(dim_big: int, a: int, b: int, rows: np.ndarray,
                    row_offset: int = 0) -> np.ndarray:
    """sym( E^T E_ab G ) where G has the given rows, E places them at row_offset."""
    M = np.zeros((dim_big, dim_big))
    M[row_offset + a, :] += rows[b]
    if a != b:
        M[row_offset + b, :] += rows[a]
    return M + M.T


# ---------------------------------------------------------------------------
# gain design
# ---------------------------------------------------------------------------

def _solve_capped(build, margin_req, options) -> tuple[sdp.SolveOutcome, float]:
    """Find the smallest norm cap beta (halving search) keeping `build` feasible."""
    opts = options or sdp.SolveOptions()
    beta = 1.0
    out = sdp.solve_feasibility(build(beta), opts)
    doublings = 0
    while out.status is not sdp.SolveStatus.FEASIBLE:
        beta *= 2.0
        doublings += 1
        if doublings > 40:
            raise SynthesisError(
                f"gain LMI infeasible up to norm cap {beta:.1e} "
                f"(last status {out.status.value})")
        out = sdp.solve_feasibility(build(beta), opts)
    lo, hi, best = beta / 2.0, beta, out
    for _ in range(24):
        mid = 0.5 * (lo + hi)
        trial = sdp.solve_feasibility(build(mid), opts)
        if trial.status is sdp.SolveStatus.FEASIBLE:
            hi, best = mid, trial
        else:
            lo = mid
    return best, hi


def design_observer_gain(A0, C0, delta, margin_req=DEFAULT_MARGIN_REQ,
                         options=None):
    """Design L0 and Po with Po(A0-L0C0)+(A0-L0C0)^T Po + 2 delta Po <= -margin I.

    Substitutes Y = Po L0, solves the LMI in (Po, Y) with a norm cap on Y
    tightened by bisection (small, reproducible gains), and recovers
    L0 = Po^{-1} Y.
    """
    A0 = np.atleast_2d(np.asarray(A0, dtype=float))
    C0 = np.asarray(C0, dtype=float).reshape(1, -1)
    n = A0.shape[0]
    if np.linalg.matrix_rank(observability_matrix(A0, C0)) < n:
        raise SynthesisError("(A0, C0) is not observable")

    def build(beta: float) -> sdp.LmiProblem:
        prob = sdp.LmiProblem()
        P = prob.symmetric_var(n)
        Y = np.array([prob.scalar_var() for _ in range(n)])
        coeffs: dict[int, np.ndarray] = {}
        for i in range(n):
            for j in range(i, n):
                E = np.zeros((n, n))
                E[i, j] = E[j, i] = 1.0
                coeffs[P[i, j]] = E @ A0 + A0.T @ E + 2.0 * delta * E
        for i in range(n):
            e = np.zeros((n, 1))
            e[i, 0] = 1.0
            coeffs[Y[i]] = -(e @ C0 + C0.T @ e.T)
        prob.add_negdef(margin_req * np.eye(n), coeffs, "observer_lyap")
        prob.require_posdef(P, 1.0, "Po>=I")
        cap = {}
        for i in range(n):
            E = np.zeros((n + 1, n + 1))
            E[i, n] = E[n, i] = 1.0
            cap[Y[i]] = -E
        prob.add_negdef(-beta * np.eye(n + 1), cap, "Y_cap")
        prob._handles = {"P": P, "Y": Y}
        return prob

    out, beta = _solve_capped(build, margin_req, options)
    prob = build(beta)
    Po = out.point[prob._handles["P"]]
    Y = out.point[prob._handles["Y"]].reshape(n, 1)
    L0 = np.linalg.solve(Po, Y)
    got = -float(np.linalg.eigvalsh(
        Po @ (A0 - L0 @ C0) + (A0 - L0 @ C0).T @ Po + 2 * delta * Po)[-1])
    if got < margin_req:
        raise SynthesisError(f"observer design margin {got:.2e} < {margin_req:.2e}")
    return L0, Po


def design_controller_gain(At0, Bt0, delta, margin_req=DEFAULT_MARGIN_REQ,
                           options=None):
    """Design K0 and Pc with Pc(At0+Bt0K0)+(At0+Bt0K0)^T Pc + 2 delta Pc < 0.

    Dual substitution Q = Pc^{-1}, Y = K0 Q; the LMI in (Q, Y) gets the same
    norm-cap bisection as the observer design.
    """
    At0 = np.atleast_2d(np.asarray(At0, dtype=float))
    Bt0 = np.asarray(Bt0, dtype=float).reshape(-1, 1)
    n = At0.shape[0]
    if np.linalg.matrix_rank(controllability_matrix(At0, Bt0)) < n:
        raise SynthesisError("(At0, Bt0) is not controllable")

    def build(beta: float) -> sdp.LmiProblem:
        prob = sdp.LmiProblem()
        Q = prob.symmetric_var(n)
        Y = np.array([prob.scalar_var() for _ in range(n)])
        coeffs: dict[int, np.ndarray] = {}
        for i in range(n):
            for j in range(i, n):
                E = np.zeros((n, n))
                E[i, j] = E[j, i] = 1.0
                coeffs[Q[i, j]] = At0 @ E + E @ At0.T + 2.0 * delta * E
        for i in range(n):
            e = np.zeros((1, n))
            e[0, i] = 1.0
            coeffs[Y[i]] = Bt0 @ e + e.T @ Bt0.T
        prob.add_negdef(margin_req * np.eye(n), coeffs, "controller_lyap")
        prob.require_posdef(Q, 1.0, "Q>=I")
        cap = {}
        for i in range(n):
            E = np.zeros((n + 1, n + 1))
            E[i, n] = E[n, i] = 1.0
            cap[Y[i]] = -E
        prob.add_negdef(-beta * np.eye(n + 1), cap, "Y_cap")
        prob._handles = {"Q": Q, "Y": Y}
        return prob

    out, beta = _solve_capped(build, margin_req, options)
    prob = build(beta)
    Q = out.point[prob._handles["Q"]]
    Y = out.point[prob._handles["Y"]].reshape(1, n)
    K0 = np.linalg.solve(Q.T, Y.T).T
    Pc = np.linalg.inv(Q)
    Pc = 0.5 * (Pc + Pc.T)
    Acl = At0 + Bt0 @ K0
    got = -float(np.linalg.eigvalsh(Pc @ Acl + Acl.T @ Pc + 2 * delta * Pc)[-1])
    if got <= 0.0:
        raise SynthesisError(f"controller design lost definiteness ({got:.2e})")
    return K0, Pc


def design_gains(model: ModalModel, delta: float,
                 margin_req=DEFAULT_MARGIN_REQ, options=None,
                 decay_slack: float = 5.0) -> GainSet:
    """Design both gains at a deepened rate decay_slack*delta.

    Minimal-norm gains at exactly delta leave no slack for the full-order
    coupling terms, so the inner designs target a deeper decay; the returned
    certificates are re-verified at the requested delta (monotone in delta).
    """
    d = decay_slack * delta
    L0, Po = design_observer_gain(model.A0, model.C0, d, margin_req, options)
    K0, Pc = design_controller_gain(model.At0, model.Bt0, d, margin_req, options)
    rep = verify_gains_raw(model, L0, K0, delta, Po, Pc)
    if not rep.ok:
        raise SynthesisError("designed gains failed re-verification")
    return GainSet(L0=L0, K0=K0, Po=Po, Pc=Pc, margin=rep.margin)


def gains_from_vectors(model: ModalModel, L0, K0, delta: float) -> GainSet:
    """Wrap externally supplied gain vectors, certifying them via Lyapunov solves."""
    L0 = np.asarray(L0, dtype=float).reshape(model.N0, 1)
    K0 = np.asarray(K0, dtype=float).reshape(1, model.N0 + 1)
    Ao = model.A0 - L0 @ model.C0 + delta * np.eye(model.N0)
    Ac = model.At0 + model.Bt0 @ K0 + delta * np.eye(model.N0 + 1)
    for name, A in (("observer", Ao), ("controller", Ac)):
        if np.max(np.linalg.eigvals(A).real) >= 0:
            raise SynthesisError(
                f"{name} closed-loop matrix is not stable with decay {delta}")
    Po = sla.solve_continuous_lyapunov(Ao.T, -np.eye(model.N0))
    Pc = sla.solve_continuous_lyapunov(Ac.T, -np.eye(model.N0 + 1))
    rep = verify_gains_raw(model, L0, K0, delta, Po, Pc)
    if not rep.ok:
        raise SynthesisError("supplied gains failed verification")
    return GainSet(L0=L0, K0=K0, Po=0.5 * (Po + Po.T), Pc=0.5 * (Pc + Pc.T),
                   margin=rep.margin)


def verify_gains_raw(model: ModalModel, L0, K0, delta, Po=None, Pc=None) -> GainReport:
    """Recompute the two Lyapunov inequalities and spectral abscissae."""
    L0 = np.asarray(L0, dtype=float).reshape(model.N0, 1)
    K0 = np.asarray(K0, dtype=float).reshape(1, model.N0 + 1)
    Ao = model.A0 - L0 @ model.C0
    Ac = model.At0 + model.Bt0 @ K0
    abs_o = float(np.max(np.linalg.eigvals(Ao).real))
    abs_c = float(np.max(np.linalg.eigvals(Ac).real))
    if Po is not None:
        lo = float(np.linalg.eigvalsh(Po @ Ao + Ao.T @ Po + 2 * delta * Po)[-1])
    else:
        lo = np.nan
    if Pc is not None:
        lc = float(np.linalg.eigvalsh(Pc @ Ac + Ac.T @ Pc + 2 * delta * Pc)[-1])
    else:
        lc = np.nan
    obs_ok = abs_o < -delta and (Po is None or lo < 0)
    ctrl_ok = abs_c < -delta and (Pc is None or lc < 0)
    margins = [-v for v in (lo, lc) if np.isfinite(v)]
    margin = float(min(margins)) if margins else 0.0
    return GainReport(obs_lyap_max=lo, ctrl_lyap_max=lc, obs_abscissa=abs_o,
                      ctrl_abscissa=abs_c, delta=delta, margin=margin,
                      obs_ok=obs_ok, ctrl_ok=ctrl_ok)


def verify_gains(gains: GainSet, model: ModalModel, delta: float) -> GainReport:
    return verify_gains_raw(model, gains.L0, gains.K0, delta, gains.Po, gains.Pc)


# ---------------------------------------------------------------------------
# closed-loop assembly
# ---------------------------------------------------------------------------

def assemble_closed_loop(model: ModalModel, gains: GainSet) -> ClosedLoopMatrices:
    N0, N = model.N0, model.N
    L0 = np.asarray(gains.L0, dtype=float).reshape(N0, 1)
    K0 = np.asarray(gains.K0, dtype=float).reshape(1, N0 + 1)
    a_row = np.zeros((1, N0 + 1))
    a_row[0, 0] = -model.a
    Ltilde = np.vstack([np.zeros((1, 1)), L0])

    dim = 2 * N + 1
    e = np.cumsum([0, N0 + 1, N0, N - N0, N - N0])
    s1, s2, s3, s4 = (slice(e[i], e[i + 1]) for i in range(4))

    F = np.zeros((dim, dim))
    F[s1, s1] = model.At0 + model.Bt0 @ K0
    F[s1, s2] = Ltilde @ model.C0
    F[s1, s4] = Ltilde @ model.C1
    F[s2, s2] = model.A0 - L0 @ model.C0
    F[s2, s4] = -L0 @ model.C1
    F[s3, s1] = -model.B1 @ (K0 + a_row)
    F[s3, s3] = model.A1
    F[s4, s4] = model.A1

    Lcal = np.zeros((dim, 1))
    Lcal[s1] = Ltilde
    Lcal[s2] = -L0

    Ktilde = np.zeros((1, dim))
    Ktilde[0, s1] = K0 + a_row
    Khat = np.zeros((1, dim))
    Khat[0, s1] = K0

    crow = np.zeros((1, dim))
    crow[0, s2] = model.C0
    crow[0, s4] = model.C1
    F1 = Lcal @ crow

    Bcal = np.zeros((dim, 1))
    Bcal[s1] = -model.Bt0
    Bcal[s3] = model.B1

    return ClosedLoopMatrices(N0=N0, N=N, F=F, Lcal=Lcal, Ktilde=Ktilde,
                              F1=F1, Bcal=Bcal, Khat=Khat, Ltilde=Ltilde,
                              a_row=a_row)


# ---------------------------------------------------------------------------
# stability LMIs
# ---------------------------------------------------------------------------

def build_continuous_lmi(cl: ClosedLoopMatrices, model: ModalModel,
                         delta: float) -> BuiltLmi:
    """Continuous-time full-order stability LMI in (P, alpha1).

    Layout: [[Phi1, P*Lcal, 0], [*, -2(lam_{N+1}-a-delta), 1],
    [*, *, -alpha1*lam_{N+1}^{-3/4}]] < 0 with
    Phi1 = PF + F^T P + 2 delta P + (4 alpha1 / (sqrt(N) pi^{3/2})) Kt^T Kt.
    """
    N = model.N
    dim = cl.dim
    D = dim + 2
    lam_next = model.lambda_next()
    rho = 4.0 / (np.sqrt(N) * np.pi ** 1.5)

    prob = sdp.LmiProblem()
    P = prob.symmetric_var(dim)
    a1 = prob.scalar_var()

    # rows of [F + delta*I | Lcal] drive the P-coefficients
    G = np.hstack([cl.F + delta * np.eye(dim), cl.Lcal,
                   np.zeros((dim, 1))])
    coeffs: dict[int, np.ndarray] = {}
    for i in range(dim):
        for j in range(i, dim):
            coeffs[P[i, j]] = _sym_entry_rows(D, i, j, G)
    kt = np.zeros(D)
    kt[:dim] = cl.Ktilde.ravel()
    a1_mat = rho * np.outer(kt, kt)
    a1_mat[D - 1, D - 1] -= lam_next ** -0.75
    coeffs[a1] = a1_mat

    const = np.zeros((D, D))
    const[dim, dim] = -2.0 * (lam_next - model.a - delta)
    const[dim, dim + 1] = const[dim + 1, dim] = 1.0
    prob.add_negdef(const, coeffs, "continuous_stability")
    prob.require_posdef(P, 0.0, "P>0")
    prob.require_posdef(np.array([[a1]]), 0.0, "alpha1>0")
    return BuiltLmi(prob, {"P": P, "alpha1": a1})


def build_sampled_lmis(cl: ClosedLoopMatrices, model: ModalModel,
                       delta0: float, delta1: float,
                       tau_my: float, tau_mu: float) -> BuiltLmi:
    """Sampled-data stability LMIs in (P, W1, W2, alpha1, alpha2).

    One big block for the delayed dynamics and a 3x3 block for the mode tail.
    The Halanay sup-term contributes -2*delta1*P on the current state, so the
    exponential weight on the (1,1) block is the net 2*(delta0 - delta1)*P.
    """
    if not delta0 > delta1 > 0:
        raise ValueError(f"need delta0 > delta1 > 0, got {delta0}, {delta1}")
    if tau_my <= 0 or tau_mu <= 0:
        raise ValueError("sampling bounds must be positive")

    N = model.N
    dim = cl.dim
    D = 2 * dim + 2
    lam_next = model.lambda_next()
    rho = 4.0 / (np.sqrt(N) * np.pi ** 1.5)
    eps_y = tau_my ** 2 * np.exp(2.0 * delta0 * tau_my)
    eps_u = tau_mu ** 2 * np.exp(2.0 * delta0 * tau_mu)
    delta_net = delta0 - delta1

    R = np.hstack([cl.F, cl.Lcal, cl.F1, -cl.Bcal])       # (dim, D)
    o3 = dim + 1                                          # Upsilon_y offset

    prob = sdp.LmiProblem()
    P = prob.symmetric_var(dim)
    W1 = prob.symmetric_var(dim)
    W2 = prob.scalar_var()
    a1 = prob.scalar_var()
    a2 = prob.scalar_var()

    # P enters through sym(E^T P [F + net*I | Lcal | F1 - 2 delta1 I | -Bcal])
    # plus the -2 delta1 P block on Upsilon_y.
    GP = np.hstack([cl.F + delta_net * np.eye(dim), cl.Lcal,
                    cl.F1 - 2.0 * delta1 * np.eye(dim), -cl.Bcal])
    coeffs: dict[int, np.ndarray] = {}
    for i in range(dim):
        for j in range(i, dim):
            M = _sym_entry_rows(D, i, j, GP)
            M[o3 + i, o3 + j] -= 2.0 * delta1
            if i != j:
                M[o3 + j, o3 + i] -= 2.0 * delta1
            coeffs[P[i, j]] = M

    # W1: -(pi^2/4) on the Upsilon_y diagonal block plus eps_y R^T W1 R.
    for i in range(dim):
        for j in range(i, dim):
            M = eps_y * (np.outer(R[i], R[j]) + np.outer(R[j], R[i]))
            if i == j:
                M *= 0.5
            M[o3 + i, o3 + j] -= np.pi ** 2 / 4.0
            if i != j:
                M[o3 + j, o3 + i] -= np.pi ** 2 / 4.0
            coeffs[W1[i, j]] = 0.5 * (M + M.T)

    q = (cl.Khat @ R).ravel()
    w2_mat = eps_u * np.outer(q, q)
    w2_mat[D - 1, D - 1] -= np.pi ** 2 / 4.0
    coeffs[W2] = w2_mat

    kt = np.zeros(D)
    kt[:dim] = cl.Ktilde.ravel()
    coeffs[a1] = rho * np.outer(kt, kt)
    a2_mat = np.zeros((D, D))
    a2_mat[D - 1, D - 1] = rho
    coeffs[a2] = a2_mat

    const = np.zeros((D, D))
    const[dim, dim] = -2.0 * delta1
    prob.add_negdef(const, coeffs, "sampled_stability")

    tail_const = np.zeros((3, 3))
    tail_const[0, 0] = -lam_next + model.a + delta0
    tail_const[0, 1] = tail_const[1, 0] = 1.0
    tail_const[0, 2] = tail_const[2, 0] = 1.0
    t1 = np.zeros((3, 3))
    t1[1, 1] = -2.0 * lam_next ** -0.75
    t2 = np.zeros((3, 3))
    t2[2, 2] = -2.0 * lam_next ** -0.75
    prob.add_negdef(tail_const, {a1: t1, a2: t2}, "mode_tail")

    prob.require_posdef(P, 0.0, "P>0")
    prob.require_posdef(W1, 0.0, "W1>0")
    for idx, name in ((W2, "W2>0"), (a1, "alpha1>0"), (a2, "alpha2>0")):
        prob.require_posdef(np.array([[idx]]), 0.0, name)
    return BuiltLmi(prob, {"P": P, "W1": W1, "W2": W2, "alpha1": a1, "alpha2": a2})


def certify_continuous(model: ModalModel, gains: GainSet, delta: float,
                       options: sdp.SolveOptions | None = None):
    """Build and solve the continuous LMI; returns (outcome, certificate|None)."""
    cl = assemble_closed_loop(model, gains)
    built = build_continuous_lmi(cl, model, delta)
    out = sdp.solve_feasibility(built.problem, options)
    return out, built.certificate(out)


def certify_sampled(model: ModalModel, gains: GainSet, delta0: float,
                    delta1: float, tau_my: float, tau_mu: float,
                    options: sdp.SolveOptions | None = None):
    cl = assemble_closed_loop(model, gains)
    built = build_sampled_lmis(cl, model, delta0, delta1, tau_my, tau_mu)
    out = sdp.solve_feasibility(built.problem, options)
    return out, built.certificate(out)


# ---------------------------------------------------------------------------
# Halanay decay rate and the sampling sweep primitive
# ---------------------------------------------------------------------------

def halanay_rate(delta0: float, delta1: float, h: float,
                 tol: float = 1e-10) -> float:
    """Unique positive root of d = delta0 - delta1*exp(2 d h).

    g(d) = d - delta0 + delta1*exp(2 d h) is strictly increasing with
    g(0) < 0 <= g(delta0 - delta1), so bisection on (0, delta0-delta1].
    """
    if delta1 < 0 or delta0 <= delta1:
        raise ValueError(f"need delta0 > delta1 >= 0, got {delta0}, {delta1}")
    if h < 0:
        raise ValueError(f"sampling bound must be nonnegative, got {h}")
    if h == 0.0 or delta1 == 0.0:
        return delta0 - delta1

    def g(d):
        return d - delta0 + delta1 * np.exp(2.0 * d * h)

    lo, hi = 0.0, delta0 - delta1
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def max_feasible_tau_u(model: ModalModel, gains: GainSet, tau_my: float,
                       delta0: float, delta1: float, grid_step: float,
                       cap: float = 0.2,
                       options: sdp.SolveOptions | None = None,
                       on_inconclusive: str = "infeasible",
                       hi_hint: float | None = None):
    """Largest grid multiple of grid_step keeping the sampled LMIs feasible.

    Feasibility is monotone in tau_mu (shrinking it subtracts a PSD term), so
    plain bisection over the grid is exact.  Returns None when even the first
    grid point is infeasible.  Inconclusive probes count as infeasible and are
    logged, unless on_inconclusive="raise".  hi_hint (e.g. the answer at a
    smaller tau_my) narrows the initial bracket; it is verified, not trusted.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    cl = assemble_closed_loop(model, gains)

    def probe(tau_mu: float) -> bool:
        built = build_sampled_lmis(cl, model, delta0, delta1, tau_my, tau_mu)
        out = sdp.solve_feasibility(built.problem, options)
        if out.status is sdp.SolveStatus.INCONCLUSIVE:
            if on_inconclusive == "raise":
                raise SynthesisError(
                    f"solver inconclusive at tau_mu = {tau_mu:.6g}")
            log.warning("inconclusive sampled LMI at tau_my=%g tau_mu=%g; "
                        "treating as infeasible", tau_my, tau_mu)
            return False
        return out.status is sdp.SolveStatus.FEASIBLE

    n_cap = max(int(round(cap / grid_step)), 1)
    if not probe(grid_step):
        return None
    lo, hi = 1, None                      # lo feasible, hi infeasible
    if hi_hint is not None:
        guess = min(max(int(round(hi_hint / grid_step)) + 1, 2), n_cap)
        while guess < n_cap:
            if probe(guess * grid_step):
                lo = guess
                guess = min(2 * guess, n_cap)
            else:
                hi = guess
                break
    if hi is None:
        if probe(n_cap * grid_step):
            log.warning("feasible at the sweep cap %g; returning the cap", cap)
            return n_cap * grid_step
        hi = n_cap
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if probe(mid * grid_step):
            lo = mid
        else:
            hi = mid
    return lo * grid_step
