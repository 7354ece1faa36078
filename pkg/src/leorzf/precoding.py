"""Regularized zero-forcing digital precoder and sum-rate KPI.

The precoder is computed on the geometric effective channel (through the
analog beams) from a maintained Gram inverse; the rate is evaluated on
the full faded channel, so arSVD truncation errors show up as residual
multi-user interference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ZeroPrecoderError


@dataclass
class Precoder:
    """Digital precoding matrix scaled to the total power constraint
    ||F_RF @ F_BB||_F^2 = P_t."""

    F_BB: np.ndarray     # (N_RF, K)
    scale: float
    P_t: float


@dataclass
class RateReport:
    """Per-UT Shannon rates (bits/s/Hz), their sum, and linear SINRs."""

    per_ut_rate: np.ndarray
    sum_rate: float
    sinr: np.ndarray


def rzf_precoder(H_eff: np.ndarray, A_inv: np.ndarray, F_RF: np.ndarray,
                 P_t: float) -> Precoder:
    """Form F_BB = H_eff^H A^-1 and scale it to transmit power P_t.

    A_inv is the (possibly Woodbury-maintained) inverse of
    H_eff H_eff^H + alpha I.
    """
    K = H_eff.shape[0]
    if A_inv.shape != (K, K):
        raise DimensionMismatchError(f"A_inv {A_inv.shape} does not match K={K}")
    F_raw = H_eff.conj().T @ A_inv
    hybrid_norm = np.linalg.norm(F_RF @ F_raw, "fro")
    if hybrid_norm == 0.0:
        raise ZeroPrecoderError("precoder has zero norm; cannot normalize power")
    scale = np.sqrt(P_t) / hybrid_norm
    return Precoder(F_BB=scale * F_raw, scale=float(scale), P_t=float(P_t))


def sum_rate(H: np.ndarray, F_RF: np.ndarray, precoder: Precoder,
             noise: np.ndarray) -> RateReport:
    """Shannon sum-rate of the hybrid precoder over the full channel.

    H rows are the conjugated UT responses, so the K x K coupling matrix
    is G = H @ F_RF @ F_BB; UT n sees signal |G[n,n]|^2 against the
    interference sum_{i != n} |G[n,i]|^2 plus its noise variance.
    """
    K = H.shape[0]
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (K,):
        raise DimensionMismatchError(f"noise must have shape ({K},), got {noise.shape}")
    if np.any(noise <= 0):
        raise ValueError("noise variances must be positive")
    if F_RF.shape[0] != H.shape[1] or precoder.F_BB.shape[0] != F_RF.shape[1]:
        raise DimensionMismatchError(
            f"inconsistent shapes H {H.shape}, F_RF {F_RF.shape}, "
            f"F_BB {precoder.F_BB.shape}"
        )
    G = H @ F_RF @ precoder.F_BB
    powers = np.abs(G) ** 2
    signal = np.diagonal(powers)
    interference = powers.sum(axis=1) - signal
    sinr = signal / (interference + noise)
    rates = np.log2(1.0 + sinr)
    return RateReport(per_ut_rate=rates, sum_rate=float(rates.sum()), sinr=sinr)
