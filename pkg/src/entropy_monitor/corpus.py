"""Feature cache: per-instance entropy profiles and baselines, in memory and on disk."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .baselines import BASELINE_NAMES, canonical_name, compute_baselines
from .errors import EmptyInput, MalformedLine, SchemaViolation
from .features import FEATURE_NAMES, summarize
from .traces import DecodingTrace, entropy_trajectory

UNLABELED = -1


@dataclass
class FeatureTable:
    """Column-oriented feature cache.

    ``labels`` uses -1 for instances without a correctness label.
    """

    instance_ids: np.ndarray
    domain_ids: np.ndarray
    labels: np.ndarray
    X: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        self.instance_ids = np.asarray(self.instance_ids, dtype=object)
        self.domain_ids = np.asarray(self.domain_ids, dtype=object)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.X = np.asarray(self.X, dtype=np.float64).reshape(-1, len(FEATURE_NAMES))
        self.B = np.asarray(self.B, dtype=np.float64).reshape(-1, len(BASELINE_NAMES))
        n = len(self.instance_ids)
        if not (len(self.domain_ids) == len(self.labels) == len(self.X) == len(self.B) == n):
            raise ValueError("feature table columns differ in length")

    def __len__(self):
        return len(self.labels)

    def domain_list(self) -> list[str]:
        return sorted(set(self.domain_ids.tolist()))

    def domain_mask(self, domains) -> np.ndarray:
        if isinstance(domains, str):
            domains = [domains]
        return np.isin(self.domain_ids, list(domains))

    def subset(self, mask) -> "FeatureTable":
        return FeatureTable(
            self.instance_ids[mask],
            self.domain_ids[mask],
            self.labels[mask],
            self.X[mask],
            self.B[mask],
        )

    def select_domains(self, domains) -> "FeatureTable":
        return self.subset(self.domain_mask(domains))

    @property
    def is_labeled(self) -> bool:
        return bool(np.all(self.labels >= 0))

    @classmethod
    def concat(cls, tables: Iterable["FeatureTable"]) -> "FeatureTable":
        tables = list(tables)
        if not tables:
            raise EmptyInput("no feature tables to concatenate")
        return cls(
            np.concatenate([t.instance_ids for t in tables]),
            np.concatenate([t.domain_ids for t in tables]),
            np.concatenate([t.labels for t in tables]),
            np.vstack([t.X for t in tables]),
            np.vstack([t.B for t in tables]),
        )

    # -- records ------------------------------------------------------------

    def records(self):
        for i in range(len(self)):
            label = int(self.labels[i])
            yield {
                "instance_id": self.instance_ids[i],
                "domain_id": self.domain_ids[i],
                "label": None if label == UNLABELED else label,
                "features": [float(v) for v in self.X[i]],
                "baselines": {k: float(v) for k, v in zip(BASELINE_NAMES, self.B[i])},
            }

    def write_jsonl(self, fh):
        for rec in self.records():
            fh.write(json.dumps(rec, ensure_ascii=False))
            fh.write("\n")

    def write_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["instance_id", "domain_id", "label", *FEATURE_NAMES, *BASELINE_NAMES])
        for i in range(len(self)):
            label = int(self.labels[i])
            writer.writerow(
                [self.instance_ids[i], self.domain_ids[i], "" if label == UNLABELED else label]
                + [repr(float(v)) for v in self.X[i]]
                + [repr(float(v)) for v in self.B[i]]
            )

    @classmethod
    def from_records(cls, records) -> "FeatureTable":
        ids, doms, labels, X, B = [], [], [], [], []
        for line_no, rec in records:
            try:
                ids.append(str(rec["instance_id"]))
                doms.append(str(rec["domain_id"]))
                label = rec.get("label")
                if label is not None and (isinstance(label, bool) or label not in (0, 1)):
                    raise SchemaViolation("label", f"{label!r}", line_no)
                labels.append(UNLABELED if label is None else int(label))
                feats = rec["features"]
                if not isinstance(feats, list) or len(feats) != len(FEATURE_NAMES):
                    raise SchemaViolation("features", f"expected {len(FEATURE_NAMES)} floats", line_no)
                X.append([float(v) for v in feats])
                base = {canonical_name(k): float(v) for k, v in rec.get("baselines", {}).items()}
                B.append([base.get(k, math.nan) for k in BASELINE_NAMES])
            except KeyError as exc:
                raise SchemaViolation(str(exc.args[0]), "missing", line_no) from exc
        return cls(ids, doms, labels, np.array(X).reshape(-1, 11), np.array(B).reshape(-1, 9))


def read_feature_cache(fh) -> FeatureTable:
    def records():
        for line_no, line in enumerate(fh, start=1):
            if isinstance(line, bytes):
                line = line.decode("utf-8")
            if not line.strip():
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(line_no, exc) from exc

    return FeatureTable.from_records(records())


def load_feature_caches(paths) -> FeatureTable:
    tables = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            tables.append(read_feature_cache(fh))
    return FeatureTable.concat(tables)


def extract_features(traces: Iterable[DecodingTrace]) -> FeatureTable:
    ids, doms, labels, X, B = [], [], [], [], []
    for trace in traces:
        profile = summarize(entropy_trajectory(trace))
        X.append(profile.as_array())
        B.append(compute_baselines(trace, profile).as_array())
        ids.append(trace.instance_id)
        doms.append(trace.domain_id)
        labels.append(UNLABELED if trace.label is None else trace.label)
    return FeatureTable(
        ids, doms, labels, np.array(X).reshape(-1, 11), np.array(B).reshape(-1, 9)
    )
