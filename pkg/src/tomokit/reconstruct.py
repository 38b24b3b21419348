"""Inverse problem: pseudo-inverse estimate, physical projection, and
maximum-likelihood refinement under the Poisson counting model.

The pseudo-inverse solves S f = Q in the SVD basis (Q = U^+ T, f = V^+ vec(rho)).
The MLE iterates the likelihood-equation fixed point
    v  <-  I_mat^{-1} J(rho) v,   I_mat = sum_j t_j X_j^+ X_j,
                                  J(rho) = sum_j (k_j / lambda_j) t_j X_j^+ X_j,
on a purified vector v (rank 1 in pure mode, rank s in mixed mode), damped so
accepted steps never lower the log-likelihood.  In pure mode a saddle-free
Newton polish on the state sphere follows, because the damped fixed point can
stall on (or be attracted to) non-maximal stationary points when the protocol
is strongly redundant; the polish certifies a second-order local maximum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError
from .protocol import MeasurementMatrix, Protocol, assemble, unvec
from .qstate import DensityMatrix, StateVector, fidelity
from .sampler import CountsVector

SV_CUTOFF = 1e-10


def _counts_array(T) -> np.ndarray:
    if isinstance(T, CountsVector):
        return T.counts.astype(float)
    arr = np.asarray(T, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"counts must be a vector, got shape {arr.shape}")
    if np.any(arr < 0) or np.any(~np.isfinite(arr)):
        raise ValidationError("counts must be finite and nonnegative")
    return arr


@dataclass(frozen=True)
class MLEOptions:
    model: str = "pure"            # "pure" or "mixed"
    rank: int | None = None        # purification rank; defaults 1 (pure) / s (mixed)
    max_iter: int = 10000
    tol_loglik: float = 1e-10      # relative log-likelihood change
    tol_state: float = 1e-8        # state change between accepted iterates
    rate_floor_scale: float = 1e-12  # floor = scale * total counts
    fixed_point_cap: int = 200     # iterations before the Newton polish takes over


@dataclass(frozen=True)
class ReconstructionResult:
    rho_pi: DensityMatrix
    rho_mle: DensityMatrix
    loglik: float
    iterations: int
    converged: bool
    f_new: np.ndarray | None = None    # V^+ vec(rho_mle), SVD-basis coordinates
    q_vec: np.ndarray | None = None    # U^+ T, data in the SVD basis
    loglik_path: tuple = field(default=())  # accepted log-likelihood values

    def to_dict(self, reference: DensityMatrix | None = None) -> dict:
        def mat(rho):
            return [[float(a.real), float(a.imag)] for a in rho.entries.reshape(-1)]
        out = {
            "rho_pi": mat(self.rho_pi),
            "rho_mle": mat(self.rho_mle),
            "dim": self.rho_mle.dim,
            "loglik": self.loglik,
            "iterations": self.iterations,
            "converged": self.converged,
        }
        if reference is not None:
            out["fidelity"] = fidelity(reference, self.rho_mle)
        return out

    def to_json(self, reference=None, **kwargs) -> str:
        return json.dumps(self.to_dict(reference), **kwargs)


# --- pseudo-inverse ----------------------------------------------------------

class PseudoInverse:
    """Moore-Penrose solver for T = B vec(rho) with the SVD precomputed."""

    def __init__(self, B: MeasurementMatrix):
        e = B.entries
        if not np.all(np.isfinite(e.real)) and np.all(np.isfinite(e.imag)):
            raise ValidationError("measurement matrix has non-finite entries")
        self.dim = B.dim
        self.u, self.sv, self.vh = np.linalg.svd(e, full_matrices=False)
        if self.sv[0] <= 0.0:
            raise NumericalError("degenerate measurement matrix: all singular values zero")
        self.keep = self.sv > SV_CUTOFF * self.sv[0]

    def solve(self, T):
        """Returns (raw matrix, f, Q)."""
        k = _counts_array(T)
        if len(k) != self.u.shape[0]:
            raise ValidationError(
                f"counts length {len(k)} does not match protocol rows {self.u.shape[0]}")
        q = self.u.conj().T @ k
        f = np.where(self.keep, q / np.where(self.keep, self.sv, 1.0), 0.0)
        raw = unvec(self.vh.conj().T @ f, self.dim)
        return raw, f, q


def pseudo_inverse_estimate(B: MeasurementMatrix, T) -> np.ndarray:
    """Raw (generally nonphysical) s x s estimate from counts."""
    raw, _, _ = PseudoInverse(B).solve(T)
    return raw


def project_to_physical(raw: np.ndarray) -> DensityMatrix:
    """Hermitize, clip negative eigenvalues, renormalize the trace.

    Idempotent on valid density matrices.
    """
    a = np.asarray(raw, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.real)) and np.all(np.isfinite(a.imag)):
        raise ValidationError("matrix has non-finite entries")
    herm = (a + a.conj().T) / 2.0
    w, v = np.linalg.eigh(herm)
    w = np.clip(w, 0.0, None)
    tot = w.sum()
    if tot <= 0.0:
        raise NumericalError("projection collapsed to zero: no positive eigenvalues")
    return DensityMatrix((v * (w / tot)) @ v.conj().T)


# --- likelihood --------------------------------------------------------------

def log_likelihood(protocol: Protocol, T, rho: DensityMatrix) -> float:
    """Poisson log-likelihood sum_j (k_j ln lambda_j - lambda_j), 0 ln 0 = 0.

    Returns -inf when some k_j > 0 sits on a zero rate.
    """
    from .protocol import predicted_rates

    k = _counts_array(T)
    lam = predicted_rates(protocol, rho)
    if len(k) != len(lam):
        raise ValidationError(f"counts length {len(k)} vs {len(lam)} settings")
    pos = k > 0
    if np.any(lam[pos] == 0.0):
        return float("-inf")
    return float(np.sum(k[pos] * np.log(lam[pos])) - lam.sum())


# --- pure-state solver -------------------------------------------------------

class _PurePoissonMLE:
    """Fixed point plus Newton polish over normalized state vectors."""

    def __init__(self, X, t, floor):
        self.X = X
        self.t = t
        self.floor = floor
        self.Xc = X.conj().T
        self.Iinv = np.linalg.inv((self.Xc * t) @ X)

    def rates(self, c):
        return self.t * np.abs(self.X @ c) ** 2

    def _ll(self, lam, k, kpos):
        lamf = np.maximum(lam, self.floor)
        return np.sum(k[kpos] * np.log(lamf[kpos])) - lam.sum()

    def _grad(self, c, lam, k, kpos):
        """Tangent gradient of the log-likelihood, layout [Re c; Im c]."""
        lamf = np.maximum(lam, self.floor)
        w = k / lamf - 1.0
        vect = self.Xc @ (w * self.t * (self.X @ c)) - (w @ lam) * c
        g = 2.0 * np.concatenate([vect.real, vect.imag])
        x = np.concatenate([c.real, c.imag])
        return g - (g @ x) * x

    def _hess(self, c, lam, k, kpos):
        """Geodesic tangent Hessian at unit c (gauge rows projected out)."""
        s = len(c)
        lamf = np.maximum(lam, self.floor)
        w = k / lamf - 1.0
        x = np.concatenate([c.real, c.imag])
        Mc = self.X @ c
        H = np.empty((2 * s, 2 * s))
        for i in range(2 * s):
            u = np.zeros(2 * s)
            u[i] = 1.0
            u -= (u @ x) * x
            uc = u[:s] + 1j * u[s:]
            Mu = self.X @ uc
            pu = self.Xc @ (w * self.t * Mu)
            t1c = 2.0 * (pu - (w @ lam) * uc)
            dlam_u = 2.0 * self.t * np.real(Mc.conj() * Mu) - 2.0 * lam * (u @ x)
            coef = -(k / lamf ** 2) * dlam_u
            coef[~kpos] = 0.0
            vect = self.Xc @ (coef * self.t * Mc) - (coef @ lam) * c
            h = np.concatenate([(t1c + 2.0 * vect).real, (t1c + 2.0 * vect).imag])
            h -= (h @ x) * x
            H[:, i] = h
        return (H + H.T) / 2.0

    @staticmethod
    def _geo(c, u, theta):
        cn = np.cos(theta) * c + np.sin(theta) * u
        return cn / np.linalg.norm(cn)

    def _polish(self, c, lam, cur, k, kpos, budget, path,
                gtol=1e-9, curv_tol=1e-9):
        s = len(c)
        steps = 0
        while steps < budget:
            steps += 1
            g = self._grad(c, lam, k, kpos)
            H = self._hess(c, lam, k, kpos)
            wh, vh = np.linalg.eigh(H)
            scale = max(-wh[0], 1e-12)
            stationary = np.linalg.norm(g) <= gtol * max(scale, 1.0)
            if stationary and wh[-1] <= curv_tol * scale:
                return c, lam, cur, steps, True
            if not stationary:
                denom = np.maximum(np.abs(wh), 1e-10 * scale)
                d = vh @ ((vh.T @ g) / denom)
            else:
                d = vh[:, -1].copy()
                if d @ g < 0:
                    d = -d
            x = np.concatenate([c.real, c.imag])
            d -= (d @ x) * x
            nd = np.linalg.norm(d)
            if nd < 1e-15:
                return c, lam, cur, steps, True
            uc = (d / nd)[:s] + 1j * (d / nd)[s:]
            theta = min(1.0, nd)
            improved = False
            for _ in range(40):
                cn = self._geo(c, uc, theta)
                lam_n = self.rates(cn)
                new = self._ll(lam_n, k, kpos)
                if new > cur:
                    c, lam, cur = cn, lam_n, new
                    path.append(cur)
                    improved = True
                    break
                theta /= 2.0
            if not improved:
                return c, lam, cur, steps, True
        return c, lam, cur, steps, False

    def solve(self, c0, k, opts: MLEOptions):
        k = np.asarray(k, dtype=float)
        kpos = k > 0
        c = c0 / np.linalg.norm(c0)
        lam = self.rates(c)
        cur = self._ll(lam, k, kpos)
        path = [cur]
        gamma = 1.0
        it = 0
        while it < min(opts.fixed_point_cap, opts.max_iter):
            it += 1
            lamf = np.maximum(lam, self.floor)
            step = self.Iinv @ (self.Xc @ ((k / lamf) * self.t * (self.X @ c)))
            nrm = np.linalg.norm(step)
            if nrm == 0.0:
                break
            step /= nrm
            ov = np.vdot(c, step)
            if abs(ov) > 1e-30:
                step *= ov.conjugate() / abs(ov)
            g = gamma
            while True:
                cn = (1.0 - g) * c + g * step
                cn /= np.linalg.norm(cn)
                lam_n = self.rates(cn)
                new = self._ll(lam_n, k, kpos)
                if new >= cur - 1e-9 or g <= 1e-6:
                    break
                g /= 2.0
            gamma = min(1.0, g * 2.0)
            dstate = np.sqrt(abs(2.0 - 2.0 * abs(np.vdot(cn, c))))
            rel = abs(new - cur) / max(abs(cur), 1.0)
            if new >= cur:
                c, lam, cur = cn, lam_n, new
                path.append(cur)
            if rel < opts.tol_loglik and dstate < opts.tol_state:
                break
        budget = max(opts.max_iter - it, 0)
        c, lam, cur, polish_steps, ok = self._polish(c, lam, cur, k, kpos, budget, path)
        return c, cur, it + polish_steps, ok, path


# --- mixed-state solver ------------------------------------------------------

class _MixedPoissonMLE:
    """Damped purified fixed point over A (system x ancilla), rho = A A^+."""

    def __init__(self, X, t, floor):
        self.X = X
        self.t = t
        self.floor = floor
        self.Xc = X.conj().T
        self.Iinv = np.linalg.inv((self.Xc * t) @ X)

    def rates(self, A):
        return self.t * np.sum(np.abs(self.X @ A) ** 2, axis=1)

    def _ll(self, lam, k, kpos):
        lamf = np.maximum(lam, self.floor)
        return np.sum(k[kpos] * np.log(lamf[kpos])) - lam.sum()

    @staticmethod
    def _align(step, A):
        """Right-multiply step by the unitary that best matches A (polar)."""
        w = step.conj().T @ A
        p, _, qh = np.linalg.svd(w)
        return step @ (p @ qh)

    def solve(self, A0, k, opts: MLEOptions):
        k = np.asarray(k, dtype=float)
        kpos = k > 0
        A = A0 / np.linalg.norm(A0)
        lam = self.rates(A)
        cur = self._ll(lam, k, kpos)
        path = [cur]
        gamma = 1.0
        converged = False
        it = 0
        while it < opts.max_iter:
            it += 1
            lamf = np.maximum(lam, self.floor)
            step = self.Iinv @ (self.Xc @ (((k / lamf) * self.t)[:, None] * (self.X @ A)))
            nrm = np.linalg.norm(step)
            if nrm == 0.0:
                break
            step = self._align(step / nrm, A)
            g = gamma
            while True:
                An = (1.0 - g) * A + g * step
                An /= np.linalg.norm(An)
                lam_n = self.rates(An)
                new = self._ll(lam_n, k, kpos)
                if new >= cur - 1e-9 or g <= 1e-6:
                    break
                g /= 2.0
            gamma = min(1.0, g * 2.0)
            drho = np.linalg.norm(An @ An.conj().T - A @ A.conj().T)
            rel = abs(new - cur) / max(abs(cur), 1.0)
            if new >= cur:
                A, lam, cur = An, lam_n, new
                path.append(cur)
            if rel < opts.tol_loglik and drho < opts.tol_state:
                converged = True
                break
        return A, cur, it, converged, path


# --- public refinement -------------------------------------------------------

def _purify(rho: DensityMatrix, rank: int) -> np.ndarray:
    w, v = rho.eigen()
    order = np.argsort(w)[::-1][:rank]
    w = w[order]
    v = v[:, order]
    # keep every purification column alive so the fixed point can grow rank
    w = np.maximum(w, 1e-6)
    w /= w.sum()
    return v * np.sqrt(w)


def mle_refine(protocol: Protocol, T, init: DensityMatrix,
               options: MLEOptions | None = None) -> ReconstructionResult:
    """Maximum-likelihood refinement from a physical initial estimate.

    Pure mode (rank 1) starts from the dominant eigenvector of `init`;
    mixed mode purifies `init` at the requested rank.  Non-convergence is
    reported through `converged`, never raised.
    """
    opts = options or MLEOptions()
    if opts.model not in ("pure", "mixed"):
        raise ValidationError(f"unknown model {opts.model!r}")
    k = _counts_array(T)
    if len(k) != protocol.m:
        raise ValidationError(
            f"counts length {len(k)} does not match protocol rows {protocol.m}")
    X = protocol.matrix
    t = protocol.exposures
    floor = opts.rate_floor_scale * max(k.sum(), 1.0)

    if opts.model == "pure":
        _, v = init.eigen()
        c0 = v[:, -1]
        solver = _PurePoissonMLE(X, t, floor)
        c, ll, iters, ok, path = solver.solve(c0, k, opts)
        rho_mle = DensityMatrix(np.outer(c, c.conj()))
    else:
        rank = opts.rank or protocol.dim
        A0 = _purify(init, rank)
        solver = _MixedPoissonMLE(X, t, floor)
        A, ll, iters, ok, path = solver.solve(A0, k, opts)
        rho = A @ A.conj().T
        rho_mle = DensityMatrix((rho + rho.conj().T) / (2.0 * np.trace(rho).real))

    B = assemble(protocol)
    pi = PseudoInverse(B)
    from .protocol import vec
    f_new = pi.vh @ vec(rho_mle.entries)
    q_vec = pi.u.conj().T @ k
    return ReconstructionResult(
        rho_pi=init, rho_mle=rho_mle, loglik=float(ll), iterations=iters,
        converged=bool(ok), f_new=f_new, q_vec=q_vec, loglik_path=tuple(path))


def reconstruct(protocol: Protocol, T, options: MLEOptions | None = None) -> ReconstructionResult:
    """Full pipeline: pseudo-inverse, physical projection, MLE refinement."""
    B = assemble(protocol)
    raw = pseudo_inverse_estimate(B, T)
    rho_pi = project_to_physical(raw)
    return mle_refine(protocol, T, rho_pi, options)
