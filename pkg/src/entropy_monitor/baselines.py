"""White-box uncertainty baselines computed from the same top-k decoding logs."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import ConfigError, MissingChosenLogprob
from .features import EntropyProfile, summarize
from .traces import DecodingTrace, entropy_trajectory

BASELINE_NAMES = (
    "se_avg",
    "se_max",
    "se_sum",
    "nll_avg",
    "nll_max",
    "nll_sum",
    "lntp",
    "mtp",
    "ppl",
)

ALIASES = {"sea": "se_sum", "eas": "se_sum", "se_mean": "se_avg"}

HIGHER_MEANS_INCORRECT = "higher_means_incorrect"
LOWER_MEANS_INCORRECT = "lower_means_incorrect"

# direction in which each score signals an incorrect answer
ORIENTATION = {
    "h_max": HIGHER_MEANS_INCORRECT,
    "h_mean": HIGHER_MEANS_INCORRECT,
    "h_std": HIGHER_MEANS_INCORRECT,
    "h_q10": HIGHER_MEANS_INCORRECT,
    "h_q25": HIGHER_MEANS_INCORRECT,
    "h_q50": HIGHER_MEANS_INCORRECT,
    "h_q75": HIGHER_MEANS_INCORRECT,
    "h_q90": HIGHER_MEANS_INCORRECT,
    "h_skew": LOWER_MEANS_INCORRECT,
    "h_kurt": LOWER_MEANS_INCORRECT,
    "h_sea": HIGHER_MEANS_INCORRECT,
    "se_avg": HIGHER_MEANS_INCORRECT,
    "se_max": HIGHER_MEANS_INCORRECT,
    "se_sum": HIGHER_MEANS_INCORRECT,
    "nll_avg": HIGHER_MEANS_INCORRECT,
    "nll_max": HIGHER_MEANS_INCORRECT,
    "nll_sum": HIGHER_MEANS_INCORRECT,
    "lntp": LOWER_MEANS_INCORRECT,
    "mtp": LOWER_MEANS_INCORRECT,
    "ppl": HIGHER_MEANS_INCORRECT,
}


def canonical_name(name: str) -> str:
    key = name.strip().lower()
    key = ALIASES.get(key, key)
    if key not in ORIENTATION:
        raise ConfigError(f"unknown metric {name!r}")
    return key


def orientation(name: str) -> str:
    return ORIENTATION[canonical_name(name)]


@dataclass(frozen=True)
class BaselineVector:
    se_avg: float
    se_max: float
    se_sum: float
    nll_avg: float
    nll_max: float
    nll_sum: float
    lntp: float
    mtp: float
    ppl: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(BASELINE_NAMES, astuple(self)))


assert tuple(f.name for f in fields(BaselineVector)) == BASELINE_NAMES


def compute_baselines(trace: DecodingTrace, profile: EntropyProfile | None = None) -> BaselineVector:
    """SE, NLL, LNTP, MTP and PPL for one trace.

    NLL terms come from ``chosen_logprob`` only, so they stay exact when the
    emitted token fell outside the logged top-k list.  The SE family is read
    off the entropy profile so both share one definition; pass ``profile`` to
    avoid recomputing it.
    """
    chosen = np.empty(len(trace.steps))
    for i, step in enumerate(trace.steps):
        if step.chosen_logprob is None:
            raise MissingChosenLogprob(i)
        chosen[i] = step.chosen_logprob
    if profile is None:
        profile = summarize(entropy_trajectory(trace))
    nll = -chosen
    nll_sum = math.fsum(nll)
    nll_avg = nll_sum / nll.size
    return BaselineVector(
        se_avg=profile.h_mean,
        se_max=profile.h_max,
        se_sum=profile.h_sea,
        nll_avg=nll_avg,
        nll_max=float(np.max(nll)),
        nll_sum=nll_sum,
        lntp=math.exp(-nll_avg),
        mtp=math.exp(float(np.min(chosen))),
        ppl=math.exp(nll_avg),
    )
