"""Singular-value analysis of measurement matrices.

The condition number K = b_max / b_min over the retained singular values
ranks protocols a priori: lower K, better reconstruction stability.
Completeness needs rank s^2; adequacy needs redundant rows (m > rank).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .protocol import MeasurementMatrix

DEFAULT_SV_THRESHOLD = 1e-10


@dataclass(frozen=True)
class SpectralReport:
    singular_values: np.ndarray   # nonincreasing, length s^2
    q: int                        # count above threshold
    condition_number: float       # +inf when incomplete
    retained_condition_number: float  # ratio over the q retained values
    complete: bool                # q == s^2
    adequate: bool                # m > q
    m: int
    dim: int
    threshold: float

    def to_dict(self) -> dict:
        return {
            "singular_values": [float(b) for b in self.singular_values],
            "q": self.q,
            "condition_number": None if np.isinf(self.condition_number)
            else float(self.condition_number),
            "retained_condition_number": float(self.retained_condition_number),
            "complete": self.complete,
            "adequate": self.adequate,
            "m": self.m,
            "dim": self.dim,
            "threshold": self.threshold,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def table(self) -> str:
        k = "inf" if np.isinf(self.condition_number) else f"{self.condition_number:.6g}"
        lines = [
            f"rows (m)            : {self.m}",
            f"dimension (s)       : {self.dim}",
            f"rank (q)            : {self.q} of {self.dim ** 2}",
            f"condition number K  : {k}",
            f"retained K          : {self.retained_condition_number:.6g}",
            f"complete (q = s^2)  : {'yes' if self.complete else 'no'}",
            f"adequate (m > q)    : {'yes' if self.adequate else 'no'}",
            "singular values     : " + " ".join(f"{b:.6g}" for b in self.singular_values),
        ]
        return "\n".join(lines)


def svd_decompose(B: MeasurementMatrix):
    """Full decomposition B = U S V^+ with U (m x m), V (s^2 x s^2) unitary
    and S (m x s^2) carrying the nonincreasing singular values."""
    e = B.entries
    if not np.all(np.isfinite(e.real)) and np.all(np.isfinite(e.imag)):
        raise ValidationError("measurement matrix has non-finite entries")
    u, sv, vh = np.linalg.svd(e, full_matrices=True)
    S = np.zeros(e.shape)
    S[: len(sv), : len(sv)] = np.diag(sv)
    return u, S, vh.conj().T


def analyze(B: MeasurementMatrix, threshold: float = DEFAULT_SV_THRESHOLD) -> SpectralReport:
    """Spectral report with a relative cutoff threshold * b_max.

    When q < s^2 the protocol is incomplete: K is reported as +inf and the
    finite ratio over the retained values is kept alongside for diagnosis.
    """
    sv = np.linalg.svd(B.entries, compute_uv=False)
    if sv[0] <= 0.0:
        raise NumericalError("all singular values are zero; degenerate protocol")
    cut = threshold * sv[0]
    q = int(np.sum(sv > cut))
    retained = sv[:q]
    retained_k = float(retained[0] / retained[-1])
    complete = q == B.dim ** 2
    k = retained_k if complete else float("inf")
    return SpectralReport(
        singular_values=sv,
        q=q,
        condition_number=k,
        retained_condition_number=retained_k,
        complete=complete,
        adequate=B.m > q,
        m=B.m,
        dim=B.dim,
        threshold=threshold,
    )


def condition_number(B: MeasurementMatrix, threshold: float = DEFAULT_SV_THRESHOLD) -> float:
    return analyze(B, threshold).condition_number
