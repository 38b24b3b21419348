"""A-priori accuracy theory: Fisher information, fidelity-loss spectra,
generalized chi-square loss distributions, and Monte Carlo campaigns.

For a complete protocol normalized to n expected events, the fidelity loss
of the maximum-likelihood estimate is asymptotically

    1 - F  =  sum_j d_j xi_j^2,      xi_j ~ N(0, 1) i.i.d.,

with j_max = 2s-2 weights for pure states and s^2 - 1 for mixed states.
The weights are the eigenvalues of Sigma^{1/2} G Sigma^{1/2} on the
gauge-orthogonal parameter subspace, where G is the quadratic form of the
fidelity loss and Sigma the asymptotic estimator covariance.  At interior
states Sigma = H^{-1} (H the Poisson Fisher information).  Settings whose
rate vanishes identically at the true state carry no Fisher weight but
still penalize misfit through the deterministic -lambda term; their rate
curvature C enters as the sandwich Sigma = (H+C)^{-1} H (H+C)^{-1}.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .protocol import Protocol, assemble, normalize_exposures, predicted_rates
from .qstate import DensityMatrix, StateVector, density_from_vector, fidelity, loss_scale
from .reconstruct import (MLEOptions, PseudoInverse, _MixedPoissonMLE,
                          _PurePoissonMLE, _purify, project_to_physical)
from .spectral import analyze

RANK_TOL = 1e-6          # eigenvalue cutoff declaring a mixed state rank-deficient
ZERO_RATE_SCALE = 1e-12  # rate below this * n counts as an exact boundary zero


@dataclass(frozen=True)
class LossSpectrum:
    """Positive weights d_j of the asymptotic loss law at sample size n."""

    d: np.ndarray
    j_max: int
    n: float
    state_kind: str  # "pure" | "mixed"

    def __post_init__(self):
        d = np.sort(np.asarray(self.d, dtype=float))[::-1]
        d.setflags(write=False)
        object.__setattr__(self, "d", d)
        if len(d) != self.j_max:
            raise ValidationError(f"expected {self.j_max} coefficients, got {len(d)}")
        if np.any(d <= 0):
            raise NumericalError("loss spectrum has nonpositive coefficients")
        if not (0.0 < d.sum() < 1.0):
            raise NumericalError(f"mean loss {d.sum()!r} outside (0, 1); n too small?")

    def to_dict(self) -> dict:
        return {"d": [float(x) for x in self.d], "j_max": self.j_max,
                "n": self.n, "state_kind": self.state_kind}


@dataclass(frozen=True)
class LossDistribution:
    """Sorted 1-F samples, theoretical (sampled law) or empirical (end-to-end)."""

    samples: np.ndarray
    source: str  # "theoretical" | "empirical"
    n: float
    trials: int
    failures: int = 0

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float))
        s.setflags(write=False)
        if len(s) and (s[0] < -1e-12 or s[-1] > 1.0 + 1e-12):
            raise ValidationError("loss samples must lie in [0, 1]")
        object.__setattr__(self, "samples", np.clip(s, 0.0, 1.0))


@dataclass(frozen=True)
class ZHistogram:
    """Normalized density over z = -log10(1-F)."""

    edges: np.ndarray
    density: np.ndarray
    z_cap: float
    capped: int

    @property
    def centers(self) -> np.ndarray:
        return (self.edges[:-1] + self.edges[1:]) / 2.0


# --- parametrizations --------------------------------------------------------

def _real_form(Q: np.ndarray) -> np.ndarray:
    """Real symmetric representation of the Hermitian form x^+ Q x."""
    return np.block([[Q.real, -Q.imag], [Q.imag, Q.real]])


def _pure_gauge(c: np.ndarray) -> np.ndarray:
    """Norm and global-phase tangents in the [Re c; Im c] layout."""
    return np.stack([np.concatenate([c.real, c.imag]),
                     np.concatenate([-c.imag, c.real])], axis=1)


def _complement(gauge: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the gauge columns."""
    dim = gauge.shape[0]
    q, _ = np.linalg.qr(np.hstack([gauge, np.eye(dim)]))
    return q[:, gauge.shape[1]:dim]


def _pure_fisher(X, t, c, zero_tol):
    """Fisher H, boundary curvature C, and the zero-rate mask (pure model)."""
    s = len(c)
    lam = t * np.abs(X @ c) ** 2
    M = X @ c
    H = np.zeros((2 * s, 2 * s))
    C = np.zeros((2 * s, 2 * s))
    zero = lam <= zero_tol
    for j in range(len(lam)):
        if zero[j]:
            C += 2.0 * t[j] * _real_form(np.outer(X[j].conj(), X[j]))
            continue
        w = t[j] * (X[j].conj() * M[j]) - lam[j] * c
        g = 2.0 * np.concatenate([w.real, w.imag])
        H += np.outer(g, g) / lam[j]
    return H, C, zero


def _hermitian_basis(s: int):
    basis = []
    for i in range(s):
        e = np.zeros((s, s), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    for i in range(s):
        for j in range(i + 1, s):
            e = np.zeros((s, s), dtype=complex)
            e[i, j] = e[j, i] = 1.0 / np.sqrt(2.0)
            basis.append(e)
            e = np.zeros((s, s), dtype=complex)
            e[i, j] = -1.0j / np.sqrt(2.0)
            e[j, i] = 1.0j / np.sqrt(2.0)
            basis.append(e)
    return basis


def _mixed_layout(dA: np.ndarray) -> np.ndarray:
    return np.concatenate([dA.real.ravel(), dA.imag.ravel()])


def _mixed_gauge(A: np.ndarray) -> np.ndarray:
    """Right-unitary orbit tangents A(iE) plus the scale tangent A."""
    cols = [_mixed_layout(A)]
    for E in _hermitian_basis(A.shape[1]):
        cols.append(_mixed_layout(A @ (1.0j * E)))
    return np.stack(cols, axis=1)


def _mixed_fisher(X, t, A):
    """Poisson Fisher information over the purification parameters of A."""
    s, r = A.shape
    lam = t * np.sum(np.abs(X @ A) ** 2, axis=1)
    if np.any(lam <= 0):
        raise NumericalError("zero rate at an interior mixed state; cannot build H")
    S = X @ A
    H = np.zeros((2 * s * r, 2 * s * r))
    Ah = A.conj().T
    for j in range(len(lam)):
        N = t[j] * np.outer(S[j].conj(), X[j]) - lam[j] * Ah   # r x s
        g = np.concatenate([2.0 * N.T.real.ravel(), -2.0 * N.T.imag.ravel()])
        H += np.outer(g, g) / lam[j]
    return H, lam


def _mixed_loss_form(A: np.ndarray) -> np.ndarray:
    """Bures quadratic form of 1-F around rho = A A^+ in purification coords."""
    s, r = A.shape
    rho = A @ A.conj().T
    p, U = np.linalg.eigh(rho)
    if p.min() < RANK_TOL:
        raise NumericalError("Bures form undefined at a rank-deficient state")
    wgt = 1.0 / np.sqrt(2.0 * np.add.outer(p, p))
    cols = []
    dim = 2 * s * r
    for idx in range(dim):
        v = np.zeros(dim)
        v[idx] = 1.0
        dA = v[: s * r].reshape(s, r) + 1j * v[s * r:].reshape(s, r)
        drho = dA @ A.conj().T + A @ dA.conj().T
        drho -= 2.0 * np.real(np.trace(A.conj().T @ dA)) * rho
        cols.append(((U.conj().T @ drho @ U) * wgt).ravel())
    V = np.stack(cols, axis=1)
    return np.real(V.conj().T @ V)


# --- public operations -------------------------------------------------------

def _resolve_state(state, model=None):
    """Returns (kind, pure vector or purification A, rho)."""
    if isinstance(state, StateVector):
        if model == "mixed":
            warnings.warn("pure state requested in the mixed model sits on the "
                          "boundary; falling back to the pure model")
        return "pure", state.amplitudes, density_from_vector(state)
    if isinstance(state, DensityMatrix):
        w, v = state.eigen()
        rank = int(np.sum(w > RANK_TOL))
        if rank == 1:
            if model == "mixed":
                warnings.warn("rank-deficient state in the mixed model; "
                              "falling back to the pure model")
            return "pure", v[:, -1], state
        if model == "pure":
            raise ValidationError("genuinely mixed state cannot use the pure model")
        if rank < state.dim:
            raise NumericalError(
                "state of intermediate rank sits on the model boundary; "
                "the asymptotic spectrum is defined only at interior points")
        A = v * np.sqrt(w)
        return "mixed", A, state
    raise ValidationError(f"unsupported state type {type(state).__name__}")


def information_matrix(protocol: Protocol, state, n: float, model: str | None = None) -> np.ndarray:
    """Poisson Fisher information over the real state parameters, exposures
    normalized so the expected total at `state` equals n.

    Pure model: 2s parameters [Re c; Im c]; norm and phase tangents are
    exact null directions.  Mixed model: 2 s r purification parameters.
    Settings with identically zero rate contribute nothing here (their rate
    gradient vanishes); loss_spectrum accounts for their curvature.
    """
    kind, coord, rho = _resolve_state(state, model)
    proto_n = normalize_exposures(protocol, n, rho)
    X = proto_n.matrix
    t = proto_n.exposures
    if kind == "pure":
        H, _, _ = _pure_fisher(X, t, coord, ZERO_RATE_SCALE * n)
        return H
    H, _ = _mixed_fisher(X, t, coord)
    return H


def loss_spectrum(protocol: Protocol, state, n: float, model: str | None = None) -> LossSpectrum:
    """Asymptotic fidelity-loss weights d_j at sample size n.

    Requires a complete protocol; incomplete ones have divergent loss along
    the unmeasured directions.
    """
    if not (n > 0):
        raise ValidationError(f"sample size must be positive, got {n!r}")
    report = analyze(assemble(protocol))
    if not report.complete:
        raise NumericalError(
            f"protocol {protocol.name or '?'} is incomplete (q={report.q} < "
            f"{protocol.dim ** 2}); the loss spectrum diverges")
    kind, coord, rho = _resolve_state(state, model)
    proto_n = normalize_exposures(protocol, n, rho)
    X = proto_n.matrix
    t = proto_n.exposures

    if kind == "pure":
        c = coord
        s = len(c)
        H, C, zero = _pure_fisher(X, t, c, ZERO_RATE_SCALE * n)
        Z = _complement(_pure_gauge(c))
        Hr = Z.T @ H @ Z
        Gr = Z.T @ _real_form(np.eye(s) - np.outer(c, c.conj())) @ Z
        if zero.any():
            warnings.warn(f"{int(zero.sum())} settings have zero rate at the true "
                          "state; applying the boundary curvature correction")
            Sr = Z.T @ (H + C) @ Z
            Si = _inv_psd(Sr)
            sigma = Si @ Hr @ Si
        else:
            sigma = _inv_psd(Hr)
        j_max = 2 * s - 2
    else:
        A = coord
        H, _ = _mixed_fisher(X, t, A)
        Z = _complement(_mixed_gauge(A))
        Hr = Z.T @ H @ Z
        Gr = Z.T @ _mixed_loss_form(A) @ Z
        sigma = _inv_psd(Hr)
        j_max = protocol.dim ** 2 - 1

    half = _psd_sqrt(sigma)
    d = np.linalg.eigvalsh(half @ Gr @ half)
    d = np.sort(d)[::-1][:j_max]
    return LossSpectrum(d, j_max, float(n), kind)


def _inv_psd(M: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(M)
    if w.min() <= 0 or w.min() < 1e-14 * w.max():
        raise NumericalError("information matrix singular on the physical subspace")
    return (v / w) @ v.T


def _psd_sqrt(M: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(M)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def mean_loss(spec: LossSpectrum) -> float:
    """Average fidelity loss <1-F> = sum_j d_j."""
    return float(spec.d.sum())


def sample_loss(spec: LossSpectrum, trials: int, seed=None) -> LossDistribution:
    """Draw sum_j d_j xi_j^2 with fresh standard normals."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal(size=(trials, spec.j_max))
    samples = np.clip((xi ** 2) @ spec.d, 0.0, 1.0)
    return LossDistribution(samples, "theoretical", spec.n, trials)


def quantiles(dist: LossDistribution, probs) -> np.ndarray:
    """Order-statistic quantiles with linear interpolation."""
    if len(dist.samples) == 0:
        raise ValidationError("empty distribution")
    probs = np.asarray(probs, dtype=float)
    if np.any(probs <= 0) or np.any(probs >= 1):
        raise ValidationError("probabilities must lie in (0, 1)")
    return np.quantile(dist.samples, probs)


class CampaignEngine:
    """Per-(protocol, state, n) reconstruction pipeline with precomputed
    SVD and solver operators; one Poisson trial per call."""

    def __init__(self, protocol: Protocol, rho_true, n: float, model: str | None = None):
        kind, coord, rho = _resolve_state(rho_true, model)
        self.kind = kind
        self.rho_true = rho
        self.c_true = coord if kind == "pure" else None
        self.proto_n = normalize_exposures(protocol, n, rho)
        self.rates = predicted_rates(self.proto_n, rho)
        self.n = float(n)
        self.pinv = PseudoInverse(assemble(self.proto_n))
        X = self.proto_n.matrix
        t = self.proto_n.exposures
        floor = MLEOptions().rate_floor_scale * n
        if kind == "pure":
            self.solver = _PurePoissonMLE(X, t, floor)
        else:
            self.solver = _MixedPoissonMLE(X, t, floor)
        self.opts = MLEOptions(model=kind)

    def run(self, rng: np.random.Generator | None, noiseless: bool = False):
        """Returns (loss, converged)."""
        k = self.rates if noiseless else rng.poisson(self.rates).astype(float)
        raw, _, _ = self.pinv.solve(k)
        init = project_to_physical(raw)
        if self.kind == "pure":
            _, v = init.eigen()
            c, _, _, ok, _ = self.solver.solve(v[:, -1], k, self.opts)
            f = abs(np.vdot(self.c_true, c)) ** 2
        else:
            A0 = _purify(init, self.proto_n.dim)
            A, _, _, ok, _ = self.solver.solve(A0, k, self.opts)
            rho = A @ A.conj().T
            rho = DensityMatrix((rho + rho.conj().T) / (2.0 * np.trace(rho).real))
            f = fidelity(self.rho_true, rho)
        return 1.0 - min(f, 1.0), ok


def empirical_loss(protocol: Protocol, rho_true, n: float, trials: int,
                   seed=None, model: str | None = None,
                   noiseless: bool = False) -> LossDistribution:
    """End-to-end Monte Carlo: normalize exposures to n at the true state,
    draw Poisson counts, reconstruct (PI + MLE), score 1-F.

    Per-trial RNG streams are spawned from the seed, so the result is
    independent of trial execution order.  Non-converged reconstructions
    are counted in `failures` (their samples are kept).
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    engine = CampaignEngine(protocol, rho_true, n, model)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    streams = root.spawn(trials)
    losses = np.empty(trials)
    failures = 0
    for i in range(trials):
        loss, ok = engine.run(np.random.default_rng(streams[i]), noiseless=noiseless)
        losses[i] = loss
        failures += not ok
    return LossDistribution(losses, "empirical", float(n), trials, failures)


def density_over_z(dist: LossDistribution, bins: int = 40, z_cap: float = 12.0) -> ZHistogram:
    """Normalized histogram over z = -log10(1-F); zero-loss samples are
    capped at z_cap, counted in the last bin, and flagged with a warning."""
    if len(dist.samples) == 0:
        raise ValidationError("empty distribution")
    losses = dist.samples
    capped_mask = losses <= 10.0 ** (-z_cap)
    capped = int(capped_mask.sum())
    if capped:
        warnings.warn(f"{capped} samples at or below 10^-{z_cap:g} loss were "
                      f"capped at z = {z_cap:g}")
    z = np.where(capped_mask, z_cap, -np.log10(np.where(capped_mask, 1.0, losses)))
    lo = float(z.min())
    hi = float(max(z.max(), lo + 1e-9))
    edges = np.linspace(lo, hi, bins + 1)
    density, edges = np.histogram(z, bins=edges, density=True)
    return ZHistogram(edges, density, z_cap, capped)


# --- exports -----------------------------------------------------------------

def distribution_to_csv(dist: LossDistribution, path, z_cap: float = 12.0) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["one_minus_F", "z"])
        for x in dist.samples:
            w.writerow([f"{x:.12g}", f"{loss_scale(1.0 - x, cap=z_cap):.12g}"])


def histogram_to_csv(hist: ZHistogram, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_center", "density"])
        for c, d in zip(hist.centers, hist.density):
            w.writerow([f"{c:.12g}", f"{d:.12g}"])


def spectrum_to_json(spec: LossSpectrum, path) -> None:
    with open(path, "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2)
        fh.write("\n")
