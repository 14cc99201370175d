"""Synthetic labeled trace corpora with known per-domain accuracy.

Each instance draws a correctness label, a length, and per-step target
entropies from a Gamma law whose mean depends on the label.  A step is a
20-atom distribution with one dominant atom of mass p1 and the remainder
spread evenly over 19 atoms; p1 is solved so the step's entropy hits the
target.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, TargetOutOfRange
from .traces import MAX_ENTROPY, MAX_TOP_K, DecodingTrace, TopKStep

SPEC_VERSION = 1
P1_MIN = 1.0 / MAX_TOP_K
_N_REST = MAX_TOP_K - 1
_TOKENS = tuple(f"a{j:02d}" for j in range(MAX_TOP_K))


def step_entropy(p1):
    """Entropy of (p1, (1-p1)/19 x 19); vectorised over p1."""
    p1 = np.asarray(p1, dtype=np.float64)
    rest = 1.0 - p1
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(p1 > 0, -p1 * np.log(p1), 0.0)
        b = np.where(rest > 0, -rest * np.log(rest / _N_REST), 0.0)
    return a + b


def solve_p1_array(targets) -> np.ndarray:
    """Bisection on the decreasing map p1 -> entropy over [1/20, 1]."""
    t = np.asarray(targets, dtype=np.float64)
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > MAX_ENTROPY):
        raise TargetOutOfRange(f"target entropy must lie in [0, ln {MAX_TOP_K}]")
    lo = np.full(t.shape, P1_MIN)
    hi = np.ones(t.shape)
    # interval halves each pass; 60 passes reach the spacing of doubles near 1
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        above = step_entropy(mid) > t
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    p1 = np.where(np.abs(step_entropy(lo) - t) <= np.abs(step_entropy(hi) - t), lo, hi)
    # exact endpoints
    p1 = np.where(t == 0.0, 1.0, p1)
    return np.where(t == MAX_ENTROPY, P1_MIN, p1)


def solve_p1(target_entropy: float) -> float:
    return float(solve_p1_array(np.array([float(target_entropy)]))[0])


def make_step(p1: float, chosen_dominant: bool) -> TopKStep:
    if p1 >= 1.0:
        return TopKStep(_TOKENS[:1], np.zeros(1), 0.0)
    lp1 = math.log(p1)
    lq = math.log((1.0 - p1) / _N_REST)
    lps = np.full(MAX_TOP_K, lq)
    lps[0] = lp1
    return TopKStep(_TOKENS, lps, lp1 if chosen_dominant else lq)


@dataclass(frozen=True)
class DomainSpec:
    domain_id: str
    n_instances: int
    true_accuracy: float


@dataclass(frozen=True)
class SynthSpec:
    domains: tuple[DomainSpec, ...]
    mu_correct: float
    mu_incorrect: float
    dispersion: float
    t_min: int = 20
    t_max: int = 60
    seed: int = 42
    model_id: str = "synthetic"

    def __post_init__(self):
        object.__setattr__(self, "domains", tuple(self.domains))
        if not self.domains:
            raise ConfigError("synth spec needs at least one domain")
        ids = [d.domain_id for d in self.domains]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate domain ids in synth spec")
        for d in self.domains:
            if not 0.0 <= d.true_accuracy <= 1.0:
                raise ConfigError(f"{d.domain_id}: true_accuracy outside [0, 1]")
            if d.n_instances < 1:
                raise ConfigError(f"{d.domain_id}: n_instances must be >= 1")
        for name in ("mu_correct", "mu_incorrect"):
            if not 0.0 < getattr(self, name) < MAX_ENTROPY:
                raise ConfigError(f"{name} must lie in (0, ln {MAX_TOP_K})")
        if not self.mu_incorrect > self.mu_correct:
            raise ConfigError("mu_incorrect must exceed mu_correct")
        if not self.dispersion > 0.0:
            raise ConfigError("dispersion must be positive")
        if not 1 <= self.t_min <= self.t_max:
            raise ConfigError("need 1 <= t_min <= t_max")

    def to_dict(self):
        return {
            "version": SPEC_VERSION,
            "domains": [
                {"domain_id": d.domain_id, "n_instances": d.n_instances,
                 "true_accuracy": d.true_accuracy}
                for d in self.domains
            ],
            "mu_correct": self.mu_correct,
            "mu_incorrect": self.mu_incorrect,
            "dispersion": self.dispersion,
            "t_min": self.t_min,
            "t_max": self.t_max,
            "seed": self.seed,
            "model_id": self.model_id,
        }

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("synth spec must be a JSON object")
        allowed = set(cls(
            (DomainSpec("x", 1, 0.5),), 0.5, 1.0, 0.1
        ).to_dict())
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown synth spec keys: {sorted(unknown)}")
        if d.get("version", SPEC_VERSION) != SPEC_VERSION:
            raise ConfigError(f"unsupported synth spec version {d.get('version')!r}")
        try:
            domains = []
            for rec in d["domains"]:
                extra = set(rec) - {"domain_id", "n_instances", "true_accuracy"}
                if extra:
                    raise ConfigError(f"unknown domain keys: {sorted(extra)}")
                domains.append(DomainSpec(str(rec["domain_id"]), int(rec["n_instances"]),
                                          float(rec["true_accuracy"])))
            kw = {k: d[k] for k in ("t_min", "t_max", "seed", "model_id") if k in d}
            return cls(tuple(domains), float(d["mu_correct"]), float(d["mu_incorrect"]),
                       float(d["dispersion"]), **kw)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid synth spec: {exc}") from exc

    @classmethod
    def load(cls, path) -> "SynthSpec":
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON: {exc}") from exc


def evenly_spaced_spec(n_domains=10, n_instances=200, acc_range=(0.1, 0.9), separation=4.0,
                       dispersion=0.15, mu_correct=0.4, t_min=20, t_max=60, seed=42,
                       prefix="D") -> SynthSpec:
    """Domains with accuracies evenly spread over ``acc_range``; means ``separation`` sigmas apart."""
    accs = np.linspace(acc_range[0], acc_range[1], n_domains)
    domains = tuple(
        DomainSpec(f"{prefix}{i:02d}", n_instances, round(float(a), 10)) for i, a in enumerate(accs)
    )
    return SynthSpec(domains, mu_correct, mu_correct + separation * dispersion, dispersion,
                     t_min, t_max, seed)


def _draw(spec: SynthSpec, d_index: int, dom: DomainSpec, i: int):
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, d_index, i]))
    label = int(rng.random() < dom.true_accuracy)
    T = int(rng.integers(spec.t_min, spec.t_max + 1))
    mu = spec.mu_correct if label == 1 else spec.mu_incorrect
    shape = (mu / spec.dispersion) ** 2
    scale = spec.dispersion**2 / mu
    h = np.clip(rng.gamma(shape, scale, T), 0.0, MAX_ENTROPY)
    return label, h, rng.random(T)


def generate(spec: SynthSpec):
    """Yield traces ordered by (domain, instance index); each instance has its own seed."""
    for d_index, dom in enumerate(spec.domains):
        draws = [_draw(spec, d_index, dom, i) for i in range(dom.n_instances)]
        # one vectorised root solve per domain; elementwise, so identical to per-instance
        p1_all = solve_p1_array(np.concatenate([h for _, h, _ in draws]))
        pos = 0
        for i, (label, h, u) in enumerate(draws):
            p1 = p1_all[pos:pos + h.size]
            pos += h.size
            steps = tuple(make_step(float(p), bool(c)) for p, c in zip(p1, u < p1))
            yield DecodingTrace(f"{dom.domain_id}-{i:05d}", dom.domain_id, steps, label,
                                spec.model_id)
