"""Finite-statistics data acquisition: Poisson draws from predicted rates.

Counts are Poisson per setting (independent), matching the picture of a
fixed acquisition time per setting with the expected grand total pinned by
the exposure normalization.  Every counts vector records its seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .protocol import Protocol

# re-exported here because the normalization condition belongs to sampling
from .protocol import expected_total  # noqa: F401


def _freeze_int(a):
    a = np.array(a, dtype=np.int64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CountsVector:
    """Registered events per setting, with the RNG seed that produced them."""

    counts: np.ndarray
    seed: int | None = None
    protocol_name: str = ""

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 1:
            raise ValidationError(f"counts must be a vector, got shape {c.shape}")
        if np.any(c < 0):
            raise ValidationError("counts must be nonnegative")
        object.__setattr__(self, "counts", _freeze_int(c))

    @property
    def m(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol_name,
            "seed": self.seed,
            "counts": [int(k) for k in self.counts],
        }


def sample_counts(rates, seed=None, rng: np.random.Generator | None = None,
                  protocol_name: str = "") -> CountsVector:
    """Draw k_j ~ Poisson(rate_j), independently per setting.

    Either a seed or an explicit generator may be supplied; with neither,
    fresh OS entropy is used and the drawn seed is recorded.
    """
    lam = np.asarray(rates, dtype=float)
    if lam.ndim != 1:
        raise ValidationError(f"rates must be a vector, got shape {lam.shape}")
    if np.any(~np.isfinite(lam)) or np.any(lam < 0):
        raise ValidationError("rates must be finite and nonnegative")
    if rng is None:
        if seed is None:
            seed = int(np.random.SeedSequence().entropy % (2 ** 63))
        rng = np.random.default_rng(seed)
    counts = rng.poisson(lam)
    return CountsVector(counts, seed=seed, protocol_name=protocol_name)


def save_counts(counts: CountsVector, path) -> None:
    with open(path, "w") as fh:
        json.dump(counts.to_dict(), fh, indent=2)
        fh.write("\n")


def load_counts(path) -> CountsVector:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read counts file {path}: {exc}") from exc
    try:
        return CountsVector(np.array(obj["counts"]),
                            seed=obj.get("seed"),
                            protocol_name=str(obj.get("protocol", "")))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed counts file {path}: {exc}") from exc


def counts_to_csv(protocol: Protocol, rates, counts: CountsVector, path) -> None:
    """One row per setting: label, predicted rate, registered count."""
    lam = np.asarray(rates, dtype=float)
    if len(lam) != protocol.m or counts.m != protocol.m:
        raise ValidationError("rates/counts length does not match the protocol")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "rate", "count"])
        for r, lam_j, k_j in zip(protocol.rows, lam, counts.counts):
            w.writerow([r.label, f"{lam_j:.12g}", int(k_j)])
