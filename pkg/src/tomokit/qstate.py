"""Quantum state containers, the two-photon state family, and fidelity.

Conventions (fixed once, used by every module):
  * two-qubit basis order is (HH, HV, VH, VV);
  * |D> = (|H> + |V>)/sqrt(2), |R> = (|H> - i|V>)/sqrt(2),
    |L> = (|H> + i|V>)/sqrt(2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
NORM_TOL = 1e-12
PSD_TOL = 1e-10

KET = {
    "H": np.array([1.0, 0.0], dtype=complex),
    "V": np.array([0.0, 1.0], dtype=complex),
    "D": np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0),
    "R": np.array([1.0, -1.0j], dtype=complex) / np.sqrt(2.0),
    "L": np.array([1.0, 1.0j], dtype=complex) / np.sqrt(2.0),
}


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state of a dim-dimensional system."""

    amplitudes: np.ndarray
    dim: int = field(default=0)

    def __post_init__(self):
        amp = _freeze(np.asarray(self.amplitudes).reshape(-1))
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "dim", len(amp))
        if self.dim < 2:
            raise ValidationError(f"state dimension must be >= 2, got {self.dim}")
        nrm = np.linalg.norm(amp)
        if abs(nrm - 1.0) > NORM_TOL:
            raise ValidationError(f"state vector norm {nrm!r} deviates from 1 beyond {NORM_TOL}")

    def density(self) -> "DensityMatrix":
        return density_from_vector(self)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"density matrix must be square, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL:
            raise ValidationError("density matrix is not Hermitian within 1e-12")
        if abs(np.trace(m).real - 1.0) > TRACE_TOL or abs(np.trace(m).imag) > TRACE_TOL:
            raise ValidationError(f"density matrix trace {np.trace(m)!r} deviates from 1")
        if np.linalg.eigvalsh(m).min() < -PSD_TOL:
            raise ValidationError("density matrix has an eigenvalue below -1e-10")
        object.__setattr__(self, "entries", _freeze(m))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def purity(self) -> float:
        return float(np.trace(self.entries @ self.entries).real)

    def eigen(self):
        """Eigenvalues (ascending) and eigenvectors, negatives clipped to 0."""
        w, v = np.linalg.eigh(self.entries)
        return np.clip(w, 0.0, None), v


def density_from_vector(psi: StateVector) -> DensityMatrix:
    """Rank-1 projector |psi><psi|."""
    c = psi.amplitudes
    return DensityMatrix(np.outer(c, c.conj()))


def family_state(c1: float, c2: float, phi: float) -> StateVector:
    """Two-photon family c1|HH> + c2 e^{i phi}|VV>.

    c1, c2 are real; (c1, c2) is renormalized when c1^2 + c2^2 deviates
    from 1 by less than 1e-6, rejected beyond that.  phi enters literally
    as exp(i*phi); the Bell state (|HH> - |VV>)/sqrt(2) is phi = pi here
    (experimental plate bookkeeping may quote other angles for the same
    relative sign).
    """
    c1 = float(c1)
    c2 = float(c2)
    ss = c1 * c1 + c2 * c2
    if ss == 0.0:
        raise ValidationError("family_state requires c1, c2 not both zero")
    if abs(ss - 1.0) > 1e-6:
        raise ValidationError(f"c1^2 + c2^2 = {ss!r} deviates from 1 beyond 1e-6")
    nrm = np.sqrt(ss)
    amp = np.array([c1 / nrm, 0.0, 0.0, (c2 / nrm) * np.exp(1j * phi)], dtype=complex)
    return StateVector(amp)


def bell_phi_minus() -> StateVector:
    """(|HH> - |VV>)/sqrt(2)."""
    return family_state(1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0), np.pi)


def maximally_mixed(dim: int) -> DensityMatrix:
    return DensityMatrix(np.eye(dim, dtype=complex) / dim)


def fidelity(rho0: DensityMatrix, rho: DensityMatrix) -> float:
    """Uhlmann fidelity [Tr sqrt(sqrt(rho0) rho sqrt(rho0))]^2, clamped to [0, 1].

    Computed by eigendecomposition; eigenvalue dust below 1e-10 is clipped
    so PSD drift cannot produce NaNs.  Symmetric in its arguments and equal
    to <psi|rho|psi> when rho0 = |psi><psi|.
    """
    if rho0.dim != rho.dim:
        raise ValidationError(f"dimension mismatch: {rho0.dim} vs {rho.dim}")
    w0, v0 = rho0.eigen()
    sq = (v0 * np.sqrt(w0)) @ v0.conj().T
    inner = sq @ rho.entries @ sq
    w = np.linalg.eigvalsh((inner + inner.conj().T) / 2.0)
    w = np.clip(w, 0.0, None)
    f = float(np.sum(np.sqrt(w)) ** 2)
    return min(max(f, 0.0), 1.0)


def loss_scale(f: float, cap: float = 12.0) -> float:
    """Number of nines of fidelity, z = -log10(1 - F).

    F = 1 (or 1 - F below 10^-cap) saturates at `cap`.
    """
    if f < 0.0 or f > 1.0:
        raise ValidationError(f"fidelity {f!r} outside [0, 1]")
    loss = 1.0 - f
    if loss <= 10.0 ** (-cap):
        return float(cap)
    return float(-np.log10(loss))


def random_state_vector(dim: int, rng: np.random.Generator) -> StateVector:
    """Haar-random pure state."""
    c = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return StateVector(c / np.linalg.norm(c))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Random mixed state from a Ginibre factor of the given rank."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


# --- state file format -------------------------------------------------------

def state_to_dict(state: StateVector | DensityMatrix) -> dict:
    if isinstance(state, StateVector):
        data = [[float(a.real), float(a.imag)] for a in state.amplitudes]
        return {"dim": state.dim, "kind": "pure", "data": data}
    flat = state.entries.reshape(-1)  # row-major
    data = [[float(a.real), float(a.imag)] for a in flat]
    return {"dim": state.dim, "kind": "mixed", "data": data}


def state_from_dict(obj: dict) -> StateVector | DensityMatrix:
    try:
        dim = int(obj["dim"])
        kind = obj["kind"]
        data = obj["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed state object: {exc}") from exc
    try:
        vals = np.array([complex(re, im) for re, im in data])
    except (TypeError, ValueError) as exc:
        raise ValidationError("state data must be [re, im] pairs") from exc
    if kind == "pure":
        if len(vals) != dim:
            raise ValidationError(f"pure state needs {dim} amplitudes, got {len(vals)}")
        return StateVector(vals)
    if kind == "mixed":
        if len(vals) != dim * dim:
            raise ValidationError(f"mixed state needs {dim * dim} entries, got {len(vals)}")
        return DensityMatrix(vals.reshape(dim, dim))
    raise ValidationError(f"unknown state kind {kind!r}")


def save_state(state: StateVector | DensityMatrix, path) -> None:
    with open(path, "w") as fh:
        json.dump(state_to_dict(state), fh, indent=2)
        fh.write("\n")


def load_state(path) -> StateVector | DensityMatrix:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read state file {path}: {exc}") from exc
    return state_from_dict(obj)
