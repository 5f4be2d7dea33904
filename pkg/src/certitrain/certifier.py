"""Inference-time certification against the joint perturbation threat model.

A test point is inflated into its test-radius box and pushed through the
interval model (whose parameter intervals already capture every training-time
perturbation). A prediction is certified only when the entire output interval
selects a single class; ties are never certified.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .interval import IntervalTensor
from .model import IntervalModel

__all__ = [
    "CERTIFIED_CORRECT",
    "NOT_CERTIFIED",
    "CERTIFIED_WRONG",
    "SampleResult",
    "CertificationResult",
    "certify_sample",
    "certified_accuracy",
    "write_results_csv",
]

CERTIFIED_CORRECT = "certified_correct"
NOT_CERTIFIED = "not_certified"
CERTIFIED_WRONG = "certified_wrong_impossible"


@dataclass
class SampleResult:
    index: int
    label: int
    verdict: str
    logit_lower: np.ndarray
    logit_upper: np.ndarray


@dataclass
class CertificationResult:
    samples: list
    certified_accuracy: float
    counts: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "n_samples": len(self.samples),
            "certified_accuracy": self.certified_accuracy,
            "counts": dict(self.counts),
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2)


def _certified_class(lower: np.ndarray, upper: np.ndarray) -> int | None:
    """The single class selected by the whole output box, or None.

    Binary head (one logit): class 1 iff the lower bound is strictly positive,
    class 0 iff the upper bound is strictly negative. Multiclass: class c iff
    its lower bound strictly exceeds every other upper bound.
    """
    if lower.shape[0] == 1:
        if lower[0] > 0.0:
            return 1
        if upper[0] < 0.0:
            return 0
        return None
    c = int(np.argmax(lower))
    others = np.delete(upper, c)
    if lower[c] > np.max(others):
        return c
    return None


def _verdict(cert_class: int | None, label: int) -> str:
    if cert_class is None:
        return NOT_CERTIFIED
    return CERTIFIED_CORRECT if cert_class == label else CERTIFIED_WRONG


def certify_sample(model: IntervalModel, x: np.ndarray, y: int, test_eps: float):
    """Certify one test point; returns (verdict, logit IntervalTensor)."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != model.in_dim:
        raise ValueError(f"input has {x.shape[1]} features, model expects {model.in_dim}")
    box = IntervalTensor.inflate(x, test_eps)
    logits = model.forward(box, remember=False)
    cert = _certified_class(logits.lower[0], logits.upper[0])
    return _verdict(cert, int(y)), logits


def certified_accuracy(
    model: IntervalModel,
    features: np.ndarray,
    labels: np.ndarray,
    test_eps: float,
) -> CertificationResult:
    """Certify every sample; returns the per-sample table and the aggregate.

    Certified accuracy is the fraction of samples whose correct prediction is
    provably invariant under the threat model.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.shape[0] == 0:
        raise ValueError("empty test set")
    box = IntervalTensor.inflate(features, test_eps)
    logits = model.forward(box, remember=False)
    samples = []
    counts = {CERTIFIED_CORRECT: 0, NOT_CERTIFIED: 0, CERTIFIED_WRONG: 0}
    for i in range(features.shape[0]):
        cert = _certified_class(logits.lower[i], logits.upper[i])
        verdict = _verdict(cert, int(labels[i]))
        counts[verdict] += 1
        samples.append(
            SampleResult(
                index=i,
                label=int(labels[i]),
                verdict=verdict,
                logit_lower=logits.lower[i].copy(),
                logit_upper=logits.upper[i].copy(),
            )
        )
    acc = counts[CERTIFIED_CORRECT] / features.shape[0]
    return CertificationResult(samples=samples, certified_accuracy=acc, counts=counts)


def write_results_csv(result: CertificationResult, path) -> None:
    """Per-sample table: index, true label, logit bounds per output, verdict."""
    n_out = result.samples[0].logit_lower.shape[0] if result.samples else 0
    header = ["index", "label"]
    for j in range(n_out):
        header += [f"logit{j}_lower", f"logit{j}_upper"]
    header.append("verdict")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s in result.samples:
            row = [s.index, s.label]
            for j in range(n_out):
                row += [repr(float(s.logit_lower[j])), repr(float(s.logit_upper[j]))]
            row.append(s.verdict)
            writer.writerow(row)
