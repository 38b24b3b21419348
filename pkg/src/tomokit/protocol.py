"""Tomographic measurement protocols and their measurement matrices.

A protocol is an ordered stack of projective rows X_j (the instrumental
matrix) with acquisition weights t_j.  Detection amplitudes are M_j = X_j c,
rates lambda_j = t_j |M_j|^2 = t_j tr(X_j^+ X_j rho).  Stacking the rows
t_j (X_j kron conj(X_j)) gives the m x s^2 measurement matrix B with
B vec(rho) equal to the rate vector, vec() taken column-major.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .qstate import KET, DensityMatrix

J16_SETTINGS = ("HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH",
                "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL")

# Bloch vectors of the canonical single-qubit tetrahedron.
TETRAHEDRON_BLOCH = np.array(
    [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / np.sqrt(3.0)

# Placeholder retardances for the two-plate family; the published plate
# thicknesses do not pin them down, so they are exposed as parameters.
B144_DELTA1 = 0.36 * np.pi
B144_DELTA2 = 0.35 * np.pi
B144_ANGLES = tuple(np.deg2rad(15.0 * k) for k in range(12))


def _freeze(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MeasurementRow:
    """One projective setting: row amplitudes, acquisition weight, label."""

    row: np.ndarray
    exposure: float = 1.0
    label: str = ""

    def __post_init__(self):
        r = _freeze(np.asarray(self.row).reshape(-1))
        if not np.any(np.abs(r) > 0):
            raise ValidationError(f"measurement row {self.label!r} is all zeros")
        if not np.all(np.isfinite(r.real)) and np.all(np.isfinite(r.imag)):
            raise ValidationError(f"measurement row {self.label!r} has non-finite entries")
        if not (self.exposure > 0):
            raise ValidationError(f"exposure must be positive, got {self.exposure!r}")
        object.__setattr__(self, "row", r)
        object.__setattr__(self, "exposure", float(self.exposure))


@dataclass(frozen=True)
class Protocol:
    """Ordered measurement rows of equal length (the instrumental matrix)."""

    rows: tuple
    dim: int
    name: str = ""

    def __post_init__(self):
        rows = tuple(self.rows)
        if not rows:
            raise ValidationError("protocol needs at least one row")
        for r in rows:
            if len(r.row) != self.dim:
                raise ValidationError(
                    f"row {r.label!r} has length {len(r.row)}, expected {self.dim}")
        object.__setattr__(self, "rows", rows)

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def matrix(self) -> np.ndarray:
        """m x dim stack of row amplitudes."""
        return np.array([r.row for r in self.rows])

    @property
    def exposures(self) -> np.ndarray:
        return np.array([r.exposure for r in self.rows])

    @property
    def labels(self) -> tuple:
        return tuple(r.label for r in self.rows)

    def with_exposures(self, exposures) -> "Protocol":
        exposures = np.asarray(exposures, dtype=float)
        if exposures.shape != (self.m,):
            raise ValidationError(f"need {self.m} exposures, got shape {exposures.shape}")
        rows = tuple(MeasurementRow(r.row, t, r.label)
                     for r, t in zip(self.rows, exposures))
        return Protocol(rows, self.dim, self.name)


@dataclass(frozen=True)
class MeasurementMatrix:
    """m x s^2 matrix with rows t_j (X_j kron conj(X_j))."""

    entries: np.ndarray
    dim: int
    m: int = field(default=0)

    def __post_init__(self):
        e = _freeze(self.entries)
        if e.ndim != 2 or e.shape[1] != self.dim ** 2:
            raise ValidationError(
                f"measurement matrix must be m x {self.dim ** 2}, got {e.shape}")
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "m", e.shape[0])


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-major flattening (second column below the first)."""
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


def _kron2(a: str, b: str) -> np.ndarray:
    return np.kron(KET[a], KET[b])


def build_j16() -> Protocol:
    """16 per-qubit Stokes settings in the published order."""
    rows = tuple(MeasurementRow(_kron2(s[0], s[1]), 1.0, s) for s in J16_SETTINGS)
    return Protocol(rows, 4, "j16")


def tetrahedron_states() -> np.ndarray:
    """Four single-qubit kets whose Bloch vectors form the canonical tetrahedron."""
    kets = []
    for nx, ny, nz in TETRAHEDRON_BLOCH:
        th = np.arccos(np.clip(nz, -1.0, 1.0))
        ph = np.arctan2(ny, nx)
        kets.append(np.array([np.cos(th / 2), np.exp(1j * ph) * np.sin(th / 2)]))
    return np.array(kets)


def build_r16() -> Protocol:
    """All 16 tensor pairs of the tetrahedron states (per-qubit SIC)."""
    tets = tetrahedron_states()
    rows = []
    for a in range(4):
        for b in range(4):
            rows.append(MeasurementRow(np.kron(tets[a], tets[b]), 1.0, f"T{a}T{b}"))
    return Protocol(tuple(rows), 4, "r16")


def waveplate(delta: float, theta: float) -> np.ndarray:
    """Waveplate unitary R(theta) diag(1, e^{i delta}) R(-theta)."""
    c, s = np.cos(theta), np.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return rot @ np.diag([1.0, np.exp(1j * delta)]) @ rot.T


def build_b144(delta1: float = B144_DELTA1, delta2: float = B144_DELTA2,
               angles1=B144_ANGLES, angles2=B144_ANGLES) -> Protocol:
    """Two-retardation-plate family: fixed H1H2 polarizer behind
    W(delta1, alpha) on qubit 1 and W(delta2, beta) on qubit 2.

    Defaults: 12 x 12 plate angles, 0..165 deg in 15 deg steps, with the
    placeholder retardances 0.36*pi and 0.35*pi (two slightly different
    plates).  Each row is the first row of the product unitary.
    """
    angles1 = tuple(float(a) for a in angles1)
    angles2 = tuple(float(a) for a in angles2)
    if not angles1 or not angles2:
        raise ValidationError("angle grids must be nonempty")
    for d, nm in ((delta1, "delta1"), (delta2, "delta2")):
        if not (0.0 <= d < 2.0 * np.pi):
            raise ValidationError(f"{nm} = {d!r} outside [0, 2*pi)")
    rows = []
    for a in angles1:
        wa = waveplate(delta1, a)[0]
        for b in angles2:
            wb = waveplate(delta2, b)[0]
            label = f"plate(a={np.rad2deg(a):g},b={np.rad2deg(b):g})"
            rows.append(MeasurementRow(np.kron(wa, wb), 1.0, label))
    return Protocol(tuple(rows), 4, "b144")


BUILTIN_PROTOCOLS = {"j16": build_j16, "r16": build_r16, "b144": build_b144}


def assemble(protocol: Protocol) -> MeasurementMatrix:
    """Measurement matrix B; (B vec(rho))_j = t_j tr(X_j^+ X_j rho)."""
    X = protocol.matrix
    t = protocol.exposures
    B = t[:, None] * np.einsum("ji,jk->jik", X, X.conj()).reshape(protocol.m, -1)
    return MeasurementMatrix(B, protocol.dim)


def predicted_rates(protocol: Protocol, rho: DensityMatrix) -> np.ndarray:
    """Expected counts lambda_j = t_j tr(X_j^+ X_j rho), real nonnegative."""
    if rho.dim != protocol.dim:
        raise ValidationError(f"dimension mismatch: protocol {protocol.dim}, state {rho.dim}")
    X = protocol.matrix
    lam = protocol.exposures * np.einsum("ji,ik,jk->j", X, rho.entries, X.conj()).real
    return np.clip(lam, 0.0, None)


def expected_total(protocol: Protocol, rho: DensityMatrix) -> float:
    """Total expected number of events for the given state."""
    return float(predicted_rates(protocol, rho).sum())


def normalize_exposures(protocol: Protocol, n: float,
                        reference: DensityMatrix | str = "uniform") -> Protocol:
    """Rescale all exposures by a common factor so the expected total is n.

    reference = "uniform" uses the maximally mixed state; otherwise the
    given density matrix.  Relative exposures (and hence the condition
    number) are unchanged.
    """
    if not (n > 0):
        raise ValidationError(f"target total n must be positive, got {n!r}")
    if isinstance(reference, str):
        if reference != "uniform":
            raise ValidationError(f"unknown reference {reference!r}")
        rho_ref = DensityMatrix(np.eye(protocol.dim, dtype=complex) / protocol.dim)
    else:
        rho_ref = reference
    total = expected_total(protocol, rho_ref)
    if total <= 0.0:
        raise ValidationError("reference state gives zero predicted rates; cannot normalize")
    return protocol.with_exposures(protocol.exposures * (n / total))


# --- protocol file format ----------------------------------------------------

def protocol_to_dict(protocol: Protocol) -> dict:
    return {
        "name": protocol.name,
        "dim": protocol.dim,
        "rows": [
            {
                "label": r.label,
                "exposure": r.exposure,
                "amplitudes": [[float(a.real), float(a.imag)] for a in r.row],
            }
            for r in protocol.rows
        ],
    }


def protocol_from_dict(obj: dict) -> Protocol:
    try:
        dim = int(obj["dim"])
        name = str(obj.get("name", ""))
        raw_rows = obj["rows"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed protocol object: {exc}") from exc
    rows = []
    for idx, rr in enumerate(raw_rows):
        try:
            amp = np.array([complex(re, im) for re, im in rr["amplitudes"]])
            rows.append(MeasurementRow(amp, float(rr.get("exposure", 1.0)),
                                       str(rr.get("label", f"row{idx}"))))
        except (KeyError, TypeError, ValueError, ValidationError) as exc:
            raise ValidationError(f"protocol row {idx}: {exc}") from exc
    return Protocol(tuple(rows), dim, name)


def save_protocol(protocol: Protocol, path) -> None:
    with open(path, "w") as fh:
        json.dump(protocol_to_dict(protocol), fh, indent=2)
        fh.write("\n")


def load_protocol(path) -> Protocol:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read protocol file {path}: {exc}") from exc
    return protocol_from_dict(obj)


def resolve_protocol(ref: str) -> Protocol:
    """Built-in name first, file path second."""
    key = ref.lower()
    if key in BUILTIN_PROTOCOLS:
        return BUILTIN_PROTOCOLS[key]()
    return load_protocol(ref)
