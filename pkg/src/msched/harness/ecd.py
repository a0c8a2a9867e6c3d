"""Effective code distance from a power-law fit of logical error against distance."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np


class EcdFitError(ValueError):
    pass


@dataclass(frozen=True)
class EcdFit:
    """``rate = a * p_ratio**(d/2)`` fitted on the baseline; ``ecd`` inverts it for the candidate."""

    a: float
    p_ratio: float
    ecd: dict
    residuals: tuple

    @property
    def mean_gain(self) -> float:
        return float(np.mean([e - d for d, e in self.ecd.items()]))

    def to_json(self) -> dict:
        return {
            "a": self.a,
            "p_ratio": self.p_ratio,
            "ecd": {str(d): e for d, e in self.ecd.items()},
            "residuals": list(self.residuals),
            "mean_gain": self.mean_gain,
        }


RateInput = Union[Mapping[int, float], Sequence]


def _as_rates(rows: RateInput) -> dict:
    if isinstance(rows, Mapping):
        return {int(d): float(r) for d, r in rows.items()}
    return {int(r.d): float(r.rate) for r in rows}


def fit_ecd(baseline: RateInput, candidate: RateInput) -> EcdFit:
    """Fit the baseline's decay and express the candidate's rates as effective distances.

    Both arguments accept a ``{distance: rate}`` mapping or result rows with
    ``d`` and ``rate`` attributes.
    """
    base = _as_rates(baseline)
    cand = _as_rates(candidate)
    if len(base) < 3:
        raise EcdFitError("the fit needs baseline rates at three or more distances")
    ds = np.array(sorted(base), dtype=float)
    rates = np.array([base[int(d)] for d in ds])
    if np.any(rates <= 0) or any(v <= 0 for v in cand.values()):
        raise EcdFitError("all rates must be positive to take logarithms")
    if np.any(np.diff(rates) >= 0):
        raise EcdFitError(
            f"baseline rates {rates.tolist()} do not decrease with distance (above threshold?)"
        )
    design = np.column_stack([np.ones_like(ds), ds / 2.0])
    y = np.log(rates)
    (log_a, log_p), *_ = np.linalg.lstsq(design, y, rcond=None)
    p_ratio = float(np.exp(log_p))
    if not 0.0 < p_ratio < 1.0:
        raise EcdFitError(f"fitted p_ratio {p_ratio} is not below 1")
    resid = tuple(float(v) for v in y - design @ np.array([log_a, log_p]))
    ecd = {d: float(2.0 * (np.log(r) - log_a) / log_p) for d, r in sorted(cand.items())}
    return EcdFit(float(np.exp(log_a)), p_ratio, ecd, resid)
