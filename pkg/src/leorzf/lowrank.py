"""Gram-matrix inverse maintenance under low-rank perturbations.

Keeps the inverse of A = H_eff H_eff^H + alpha*I up to date while the
effective channel drifts, by factoring each Gram correction with an
adaptive randomized SVD and applying the Woodbury identity whenever the
estimated rank is small enough to beat a full re-inversion.

Costs are tracked in dimensionless units: K^3 for a full inversion of a
K x K matrix, K^2 + K^2*r + r^3 + r^2*K for a rank-r Woodbury update
(sketching folded in, all big-O constants taken as 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatchError,
    SingularAuxiliaryError,
    SingularMatrixError,
)

# Condition-estimate ceilings (double precision safety margins).
COND_LIMIT_FULL = 1e14
COND_LIMIT_AUX = 1e12


@dataclass
class GramState:
    """Regularized Gram matrix, its maintained inverse and cost counter.

    A is K x K Hermitian, A_inv its (possibly Woodbury-maintained)
    inverse, alpha >= 0 the regularization in linear power units and
    cost_accum the cumulative inversion cost in dimensionless units.
    """

    A: np.ndarray
    A_inv: np.ndarray
    alpha: float
    K: int
    cost_accum: float = 0.0


@dataclass
class LowRankFactor:
    """Truncated SVD triple U_r diag(Sigma_r) V_r^H approximating a
    square perturbation, with estimated rank k_est (0 = empty factor).
    used_fallback marks factors returned by the iteration-cap tail
    rather than by meeting the energy target."""

    U_r: np.ndarray
    Sigma_r: np.ndarray
    V_r: np.ndarray
    k_est: int
    used_fallback: bool = False

    @classmethod
    def empty(cls, K: int) -> "LowRankFactor":
        z = np.zeros((K, 0), dtype=complex)
        return cls(U_r=z, Sigma_r=np.zeros(0), V_r=z.copy(), k_est=0)

    def as_matrix(self) -> np.ndarray:
        """Densify U_r diag(Sigma_r) V_r^H (testing/fallback use only)."""
        return (self.U_r * self.Sigma_r) @ self.V_r.conj().T


@dataclass
class ArSvdConfig:
    """Adaptive randomized SVD parameters: energy threshold eta in (0,1],
    initial working rank k_init, oversampling p, iteration cap i_max."""

    eta: float
    k_init: int = 2
    p: int = 1
    i_max: int = 8

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must be in (0,1], got {self.eta}")
        if self.k_init < 1:
            raise ValueError(f"k_init must be >= 1, got {self.k_init}")
        if self.p < 0:
            raise ValueError(f"p must be >= 0, got {self.p}")
        if self.i_max < 1:
            raise ValueError(f"i_max must be >= 1, got {self.i_max}")


@dataclass
class UpdateReport:
    """Outcome of one inverse update: which path ran ('woodbury', 'full'
    or 'none'), the estimated perturbation rank and the cost charged."""

    method: str
    k_est: int
    cost_units: float


def cost_full(K: int) -> float:
    """Cost of one full K x K inversion, in dimensionless units."""
    return float(K) ** 3


def cost_wb_arsvd(K: int, r: int) -> float:
    """Cost of a rank-r Woodbury update including the sketch work."""
    K = float(K)
    r = float(r)
    return K**2 + K**2 * r + r**3 + r**2 * K


def sketch_cost(K: int, r: int) -> float:
    """Sketch/projection share of the update cost (charged on top of a
    full inversion when the dispatcher rejects the Woodbury path)."""
    K = float(K)
    r = float(r)
    return K**2 * r + r**2 * K


def _require_square(A: np.ndarray) -> int:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got {A.shape}")
    return A.shape[0]


def direct_inverse(A: np.ndarray) -> np.ndarray:
    """Invert a Hermitian matrix by factor-then-solve.

    Uses a Cholesky factorization when A is positive definite and an
    LDL^H solve otherwise. Raises SingularMatrixError when the condition
    estimate exceeds 1e14.
    """
    K = _require_square(A)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > COND_LIMIT_FULL:
        raise SingularMatrixError(f"condition estimate {cond:.3e} exceeds {COND_LIMIT_FULL:.1e}")
    eye = np.eye(K, dtype=A.dtype)
    try:
        c, low = scipy.linalg.cho_factor(A, check_finite=False)
        return scipy.linalg.cho_solve((c, low), eye, check_finite=False)
    except scipy.linalg.LinAlgError:
        # Hermitian but not positive definite.
        return scipy.linalg.solve(A, eye, assume_a="her", check_finite=False)


def gram_matrix(H_eff: np.ndarray, alpha: float) -> GramState:
    """Form A = H_eff H_eff^H + alpha*I and invert it from scratch.

    Charges K^3 cost units. With alpha = 0 the effective channel must
    have full row rank, otherwise A is singular by construction.
    """
    if H_eff.ndim != 2:
        raise DimensionMismatchError(f"H_eff must be 2-D, got {H_eff.shape}")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    K = H_eff.shape[0]
    if alpha == 0.0 and np.linalg.matrix_rank(H_eff) < K:
        raise SingularMatrixError("alpha = 0 requires H_eff with full row rank")
    A = H_eff @ H_eff.conj().T
    A = 0.5 * (A + A.conj().T)  # kill gemm round-off asymmetry
    A = A + alpha * np.eye(K, dtype=complex)
    A_inv = direct_inverse(A)
    return GramState(A=A, A_inv=A_inv, alpha=float(alpha), K=K, cost_accum=cost_full(K))


def gram_delta(H_eff: np.ndarray, dH_eff: np.ndarray) -> np.ndarray:
    """Gram correction for a channel perturbation: the exact difference
    between the new and old Gram matrices,

        H_eff dH^H + dH H_eff^H + dH dH^H,

    Hermitian by construction."""
    if H_eff.shape != dH_eff.shape:
        raise DimensionMismatchError(
            f"shape mismatch: H_eff {H_eff.shape} vs dH_eff {dH_eff.shape}"
        )
    cross = H_eff @ dH_eff.conj().T
    return cross + cross.conj().T + dH_eff @ dH_eff.conj().T


def woodbury_update(state: GramState, lr: LowRankFactor) -> GramState:
    """Apply a low-rank correction to the Gram state via the Woodbury
    matrix identity.

    Given A^-1 and the factor U_r diag(Sigma_r) V_r^H, computes

        (A + U S V^H)^-1 = A^-1 - A^-1 U (S^-1 + V^H A^-1 U)^-1 V^H A^-1

    keeping every intermediate at K x r or r x r until the final K x K
    combine. Charges cost_wb_arsvd(K, r) units.

    Raises
    ------
    SingularAuxiliaryError
        When the r x r auxiliary matrix has condition estimate above
        1e12; the caller is expected to fall back to direct inversion.
    """
    r = lr.k_est
    if r < 1:
        raise ValueError("woodbury_update requires a factor of rank >= 1")
    K = state.K
    if lr.U_r.shape != (K, r) or lr.V_r.shape != (K, r) or lr.Sigma_r.shape != (r,):
        raise DimensionMismatchError(
            f"factor shapes {lr.U_r.shape}/{lr.Sigma_r.shape}/{lr.V_r.shape} "
            f"inconsistent with K={K}, r={r}"
        )
    Ainv = state.A_inv
    AinvU = Ainv @ lr.U_r                                  # K x r
    aux = np.diag(1.0 / lr.Sigma_r).astype(complex)
    aux += lr.V_r.conj().T @ AinvU                         # r x r
    cond = np.linalg.cond(aux)
    if not np.isfinite(cond) or cond > COND_LIMIT_AUX:
        raise SingularAuxiliaryError(
            f"auxiliary condition estimate {cond:.3e} exceeds {COND_LIMIT_AUX:.1e}"
        )
    aux_inv = np.linalg.inv(aux)
    VhAinv = lr.V_r.conj().T @ Ainv                        # r x K
    A_inv_new = Ainv - (AinvU @ aux_inv) @ VhAinv
    A_new = state.A + (lr.U_r * lr.Sigma_r) @ lr.V_r.conj().T
    return GramState(
        A=A_new,
        A_inv=A_inv_new,
        alpha=state.alpha,
        K=K,
        cost_accum=state.cost_accum + cost_wb_arsvd(K, r),
    )


def _orthonormal_basis(Y: np.ndarray) -> np.ndarray:
    """Thin-QR orthonormal basis with the R diagonal made real
    nonnegative, so repeated runs give identical bases."""
    Q, R = np.linalg.qr(Y)
    diag = np.diagonal(R)
    mag = np.abs(diag)
    safe = np.where(mag > 0, mag, 1.0)
    phase = np.where(mag > 0, diag / safe, 1.0)
    # Q @ diag(phase) paired with diag(phase)^H @ R leaves the product
    # unchanged and pins the R diagonal to |diag|.
    return Q * phase


def arsvd(dA: np.ndarray, cfg: ArSvdConfig, rng: np.random.Generator) -> LowRankFactor:
    """Adaptive randomized SVD of a square perturbation matrix.

    Grows a sketched subspace until the retained singular values capture
    at least a fraction eta of the squared Frobenius norm of dA.

    Each iteration draws a complex Gaussian test matrix Omega (K x d with
    d = min(k0 + p, K)), forms the sketch Y = dA @ Omega, orthonormalizes
    it, projects B = Q^H dA, takes the small SVD of B and looks for the
    smallest r whose cumulative squared singular values reach the energy
    target. On failure the working rank k0 is doubled and the subspace is
    redrawn; after i_max failures the full rank-d factor of the last
    iteration is returned.

    Parameters
    ----------
    dA : (K, K) complex ndarray
        Perturbation to factor.
    cfg : ArSvdConfig
        Energy threshold and sketch sizing.
    rng : numpy.random.Generator
        Sole source of randomness; identical states give bit-identical
        factors.

    Returns
    -------
    LowRankFactor
        Truncated factor with k_est = r, or the empty factor when
        ||dA||_F = 0.
    """
    K = _require_square(dA)
    total_energy = np.linalg.norm(dA, "fro") ** 2
    if total_energy == 0.0:
        return LowRankFactor.empty(K)
    e_target = cfg.eta * total_energy

    k0 = cfg.k_init
    U_approx = s = Vh = None
    d = 0
    for _ in range(cfg.i_max):
        d = min(k0 + cfg.p, K)
        omega = np.sqrt(0.5) * (
            rng.standard_normal((K, d)) + 1j * rng.standard_normal((K, d))
        )
        Y = dA @ omega
        Q = _orthonormal_basis(Y)
        B = Q.conj().T @ dA
        U_hat, s, Vh = np.linalg.svd(B, full_matrices=False)
        U_approx = Q @ U_hat
        cum = np.cumsum(s**2)
        hits = np.nonzero(cum >= e_target)[0]
        if hits.size > 0:
            r = int(hits[0]) + 1
            return LowRankFactor(
                U_r=U_approx[:, :r],
                Sigma_r=s[:r].copy(),
                V_r=Vh[:r].conj().T,
                k_est=r,
            )
        k0 *= 2

    # Energy target never met: return the full rank-d factor of the last
    # sketch, dropping numerically-zero singular values so the factor
    # stays invertible.
    floor = s[0] * K * np.finfo(float).eps
    r = int(np.count_nonzero(s > floor))
    r = max(r, 1)
    return LowRankFactor(
        U_r=U_approx[:, :r],
        Sigma_r=s[:r].copy(),
        V_r=Vh[:r].conj().T,
        k_est=r,
        used_fallback=True,
    )


def update_inverse(
    state: GramState,
    H_eff: np.ndarray,
    dH_eff: np.ndarray,
    cfg: ArSvdConfig,
    rng: np.random.Generator,
) -> tuple[GramState, UpdateReport]:
    """Advance the maintained inverse across a channel perturbation.

    Factors the Gram correction with arsvd and dispatches on the rank
    ratio: k_est/K <= 0.5 takes the Woodbury path, anything larger (or an
    ill-conditioned auxiliary matrix) falls back to a direct inversion of
    the corrected Gram matrix. A zero perturbation returns the state
    unchanged apart from the scan cost.

    Returns the new state and an UpdateReport with the path taken, the
    estimated rank and the cost charged.
    """
    K = state.K
    if H_eff.shape[0] != K:
        raise DimensionMismatchError(
            f"H_eff has {H_eff.shape[0]} rows, state expects K={K}"
        )
    dA = gram_delta(H_eff, dH_eff)
    lr = arsvd(dA, cfg, rng)

    if lr.k_est == 0:
        cost = cost_wb_arsvd(K, 0)  # the K^2 perturbation scan
        new_state = GramState(
            A=state.A, A_inv=state.A_inv, alpha=state.alpha, K=K,
            cost_accum=state.cost_accum + cost,
        )
        return new_state, UpdateReport(method="none", k_est=0, cost_units=cost)

    if lr.k_est / K <= 0.5:
        try:
            new_state = woodbury_update(state, lr)
            cost = cost_wb_arsvd(K, lr.k_est)
            return new_state, UpdateReport(method="woodbury", k_est=lr.k_est, cost_units=cost)
        except SingularAuxiliaryError:
            pass  # fall through to direct inversion

    # Full branch: the corrected Gram matrix is formed from the updated
    # channel itself, so a direct inversion also discards any truncation
    # error accumulated in the maintained state.
    H_new = H_eff + dH_eff
    A_new = H_new @ H_new.conj().T
    A_new = 0.5 * (A_new + A_new.conj().T) + state.alpha * np.eye(K, dtype=complex)
    A_inv_new = direct_inverse(A_new)
    cost = cost_full(K) + sketch_cost(K, lr.k_est)
    new_state = GramState(
        A=A_new, A_inv=A_inv_new, alpha=state.alpha, K=K,
        cost_accum=state.cost_accum + cost,
    )
    return new_state, UpdateReport(method="full", k_est=lr.k_est, cost_units=cost)
