"""Spectral data of the Dirichlet Laplacian on (0,1) and reduced design matrices.

Everything here is closed-form: eigenvalues (n*pi)^2, sine eigenfunctions,
input coefficients sqrt(2)/(n*pi) from the boundary lifting r(x) = 1 - x, and
point-evaluation output coefficients. The reduced matrices feed the gain
design and the closed-loop LMIs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssumptionError, ConfigError

SQRT2 = np.sqrt(2.0)

# Composite Simpson: 2000 panels = 4001 nodes on [0, 1].  Sine-product
# integrands are integrated exactly by this rule (trig aliasing), and the
# (1-x)*sin(n*pi*x) boundary-derivative error stays below 1e-9 up to n = 50.
QUAD_PANELS = 2000


def quad_nodes(panels: int = QUAD_PANELS) -> np.ndarray:
    return np.linspace(0.0, 1.0, 2 * panels + 1)


def quad_weights(panels: int = QUAD_PANELS) -> np.ndarray:
    h = 1.0 / (2 * panels)
    w = np.full(2 * panels + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (h / 3.0)


def quad_inner(fvals, gvals, panels: int = QUAD_PANELS) -> float:
    """Simpson inner product of two sampled functions on quad_nodes()."""
    fvals = np.asarray(fvals, dtype=float)
    gvals = np.asarray(gvals, dtype=float)
    if fvals.shape != gvals.shape or fvals.shape != (2 * panels + 1,):
        raise ValueError("samples must live on the quadrature grid")
    return float(quad_weights(panels) @ (fvals * gvals))


def _sinpi(z):
    """sin(pi*z) with exact zeros at integer z (so phi_n(0) = phi_n(1) = 0)."""
    z = np.asarray(z, dtype=float)
    r = np.mod(z, 2.0)
    out = np.sin(np.pi * r)
    out = np.where((r == 0.0) | (r == 1.0), 0.0, out)
    return out if out.ndim else float(out)


def eigenvalue(n: int) -> float:
    if n < 1:
        raise ValueError(f"mode index must be >= 1, got {n}")
    return float((n * np.pi) ** 2)


def eigenpair(n: int):
    """Return (lambda_n, phi_n) with phi_n evaluable on [0, 1]."""
    lam = eigenvalue(n)

    def phi(x):
        return SQRT2 * _sinpi(n * np.asarray(x, dtype=float))

    return lam, phi


def eigenvalues(n_max: int) -> np.ndarray:
    return (np.arange(1, n_max + 1) * np.pi) ** 2


def input_coeff(n: int) -> float:
    """Projection of the boundary lifting r(x) = 1 - x on mode n."""
    if n < 1:
        raise ValueError(f"mode index must be >= 1, got {n}")
    return float(SQRT2 / (n * np.pi))


def input_coeffs(n_max: int) -> np.ndarray:
    return SQRT2 / (np.arange(1, n_max + 1) * np.pi)


def output_coeff(n: int, x_star: float) -> float:
    """Point evaluation phi_n(x_star) of the sensor location."""
    if n < 1:
        raise ValueError(f"mode index must be >= 1, got {n}")
    if not 0.0 < x_star < 1.0:
        raise ValueError(f"sensor location must lie in (0, 1), got {x_star}")
    return float(SQRT2 * _sinpi(n * x_star))


def output_coeffs(n_max: int, x_star: float) -> np.ndarray:
    if not 0.0 < x_star < 1.0:
        raise ValueError(f"sensor location must lie in (0, 1), got {x_star}")
    return SQRT2 * _sinpi(np.arange(1, n_max + 1) * x_star)


def select_N0(a: float, delta: float) -> int:
    """Smallest controller-model dimension with -lambda_n + a < -delta beyond it.

    Clamped to >= 1 so the controller always carries the boundary input as a
    state plus at least one mode.
    """
    if delta <= 0:
        raise ValueError(f"decay target must be positive, got {delta}")
    # need lambda_n > a + delta for every n > N0, i.e. lambda_{N0+1} > a + delta
    n1 = max(int(np.ceil(np.sqrt(max(a + delta, 0.0)) / np.pi)), 1)
    while eigenvalue(n1) <= a + delta:
        n1 += 1
    return max(n1 - 1, 1)


def check_assumption1(x_star: float, N0: int, tol: float = 1e-6) -> bool:
    """True iff |c_n| > tol for every controlled mode n = 1..N0."""
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    c = output_coeffs(N0, x_star)
    return bool(np.all(np.abs(c) > tol))


def tail_bounds(N: int) -> tuple[float, float]:
    """Closed-form dominating bounds for the two mode-tail series beyond N."""
    if N < 1:
        raise ValueError(f"truncation order must be >= 1, got {N}")
    return 2.0 / (np.pi ** 2 * N), 2.0 / (np.sqrt(N) * np.pi ** 1.5)


def tail_partial_sums(N: int, n_terms: int = 1_000_000, remainder: bool = True):
    """Partial sums of sum b_n^2 and sum lambda_n^(-3/4) over n = N+1..N+n_terms.

    With remainder=True an integral bound for the discarded infinite rest is
    added, so the result upper-bounds the true tail.
    """
    n = np.arange(N + 1, N + n_terms + 1, dtype=float)
    s_b2 = float(np.sum(2.0 / (np.pi * n) ** 2))
    s_l34 = float(np.sum((n * np.pi) ** -1.5))
    if remainder:
        m = float(N + n_terms)
        s_b2 += 2.0 / (np.pi ** 2 * m)
        s_l34 += 2.0 / (np.sqrt(m) * np.pi ** 1.5)
    return s_b2, s_l34


@dataclass(frozen=True)
class SystemConfig:
    """Physical and design parameters of the boundary-controlled rod.

    delta0/delta1/tau_my/tau_mu are only needed for sampled-data analysis;
    leave them None for the continuous-time design.
    """

    a: float
    x_star: float = 1.0 / SQRT2
    delta: float = 0.1
    N: int = 4
    N0: int | None = None
    delta0: float | None = None
    delta1: float | None = None
    tau_my: float | None = None
    tau_mu: float | None = None

    def __post_init__(self):
        if not 0.0 < self.x_star < 1.0:
            raise ConfigError(f"x_star must lie in (0, 1), got {self.x_star}")
        if self.delta <= 0:
            raise ConfigError(f"delta must be positive, got {self.delta}")
        if self.N < 1:
            raise ConfigError(f"N must be >= 1, got {self.N}")
        if self.N0 is not None and not 1 <= self.N0 <= self.N:
            raise ConfigError(f"need 1 <= N0 <= N, got N0={self.N0}, N={self.N}")
        sampled = [self.delta0, self.delta1, self.tau_my, self.tau_mu]
        if any(v is not None for v in sampled):
            if any(v is None for v in sampled):
                raise ConfigError(
                    "sampled-data mode needs all of delta0, delta1, tau_my, tau_mu"
                )
            if not self.delta0 > self.delta1 > 0:
                raise ConfigError(
                    f"need delta0 > delta1 > 0, got {self.delta0}, {self.delta1}"
                )
            if self.tau_my <= 0 or self.tau_mu <= 0:
                raise ConfigError("sampling bounds tau_my, tau_mu must be positive")

    @property
    def sampled(self) -> bool:
        return self.tau_my is not None

    def resolved_N0(self) -> int:
        return self.N0 if self.N0 is not None else select_N0(self.a, self.delta)


@dataclass(frozen=True)
class ModalModel:
    """Modal coefficients up to M_max plus the reduced design matrices."""

    a: float
    x_star: float
    N0: int
    N: int
    M_max: int
    lambdas: np.ndarray  # (M_max,)
    b: np.ndarray        # (M_max,)
    c: np.ndarray        # (M_max,)
    A0: np.ndarray       # (N0, N0) diagonal
    B0: np.ndarray       # (1, N0)
    C0: np.ndarray       # (1, N0)
    Bt0: np.ndarray      # (N0+1, 1) column [1, -b_1, ..., -b_N0]
    At0: np.ndarray      # (N0+1, N0+1)
    A1: np.ndarray       # (N-N0, N-N0) diagonal
    B1: np.ndarray       # (N-N0, 1)
    C1: np.ndarray       # (1, N-N0)

    @property
    def state_dim(self) -> int:
        """Dimension 2N+1 of the coupled observer/error state."""
        return 2 * self.N + 1

    def lambda_next(self) -> float:
        """lambda_{N+1}, the first unmodelled eigenvalue."""
        return eigenvalue(self.N + 1)


def reduced_matrices(config: SystemConfig, M_max: int | None = None,
                     assumption_tol: float = 1e-6) -> ModalModel:
    """Build the ModalModel for a validated configuration.

    Raises AssumptionError naming the first failing index when some c_n with
    n <= N0 is numerically zero at the sensor location.
    """
    N0 = config.resolved_N0()
    N = config.N
    if N < N0:
        raise ConfigError(f"N = {N} is below the controller dimension N0 = {N0}")
    if M_max is None:
        M_max = max(100, 3 * N)
    if M_max < N:
        raise ConfigError(f"M_max = {M_max} must be at least N = {N}")

    lam = eigenvalues(M_max)
    b = input_coeffs(M_max)
    c = output_coeffs(M_max, config.x_star)

    bad = np.flatnonzero(np.abs(c[:N0]) <= assumption_tol)
    if bad.size:
        i = int(bad[0]) + 1
        raise AssumptionError(i, float(c[i - 1]), assumption_tol)

    a = config.a
    A0 = np.diag(-lam[:N0] + a)
    B0 = b[:N0].reshape(1, N0)
    C0 = c[:N0].reshape(1, N0)
    Bt0 = np.concatenate(([1.0], -b[:N0])).reshape(N0 + 1, 1)
    At0 = np.zeros((N0 + 1, N0 + 1))
    At0[1:, 0] = a * b[:N0]
    At0[1:, 1:] = A0
    A1 = np.diag(-lam[N0:N] + a)
    B1 = b[N0:N].reshape(N - N0, 1)
    C1 = c[N0:N].reshape(1, N - N0)

    return ModalModel(a=a, x_star=config.x_star, N0=N0, N=N, M_max=M_max,
                      lambdas=lam, b=b, c=c, A0=A0, B0=B0, C0=C0, Bt0=Bt0,
                      At0=At0, A1=A1, B1=B1, C1=C1)
