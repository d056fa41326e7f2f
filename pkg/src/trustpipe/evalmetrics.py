"""Classification evaluation and group-fairness metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import InvariantError, TrustPipeError


@dataclass(frozen=True)
class PredRow:
    sample_id: str
    y_true: str
    y_pred: str
    scores: tuple | None = None  # per-class probabilities, ordered by label set
    attrs: dict = field(default_factory=dict)


def check_rows(rows, labels) -> None:
    label_set = set(labels)
    for r in rows:
        if r.y_true not in label_set:
            raise InvariantError(f"label {r.y_true!r} outside label set")
        if r.y_pred not in label_set:
            raise InvariantError(f"label {r.y_pred!r} outside label set")
        if r.scores is not None:
            if any(not math.isfinite(s) for s in r.scores):
                raise InvariantError(f"non-finite score on sample {r.sample_id}")
            if abs(sum(r.scores) - 1.0) > 1e-6:
                raise InvariantError(f"scores do not sum to 1 on sample {r.sample_id}")


@dataclass(frozen=True)
class ConfusionMatrix:
    labels: tuple  # ordered
    counts: tuple  # rows = true label, cols = predicted label

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    @property
    def accuracy(self) -> float:
        return sum(self.counts[i][i] for i in range(len(self.labels))) / self.total

    def precision(self, label: str):
        j = self.labels.index(label)
        col = sum(self.counts[i][j] for i in range(len(self.labels)))
        return self.counts[j][j] / col if col else None

    def recall(self, label: str):
        i = self.labels.index(label)
        row = sum(self.counts[i])
        return self.counts[i][i] / row if row else None

    def to_report(self) -> dict:
        return {
            "kind": "confusion",
            "labels": list(self.labels),
            "counts": [list(r) for r in self.counts],
            "metrics": {
                "accuracy": self.accuracy,
                "per_class": {
                    l: {"precision": self.precision(l), "recall": self.recall(l)}
                    for l in self.labels
                },
            },
        }


def confusion(rows, labels) -> ConfusionMatrix:
    """Tally true-vs-predicted counts over an ordered label set."""
    if not rows:
        raise TrustPipeError("cannot score an empty prediction set")
    check_rows(rows, labels)
    idx = {l: i for i, l in enumerate(labels)}
    counts = [[0] * len(labels) for _ in labels]
    for r in rows:
        counts[idx[r.y_true]][idx[r.y_pred]] += 1
    return ConfusionMatrix(tuple(labels), tuple(tuple(r) for r in counts))


@dataclass(frozen=True)
class FairnessResult:
    attribute: str
    privileged_group: str
    favorable_label: str
    statistical_parity_difference: float
    disparate_impact: float  # may be +inf
    equal_opportunity_difference: float | None  # None when a TPR is undefined
    n_privileged: int
    n_unprivileged: int

    def to_dict(self) -> dict:
        di = self.disparate_impact
        return {
            "privileged_group": self.privileged_group,
            "favorable_label": self.favorable_label,
            "statistical_parity_difference": self.statistical_parity_difference,
            "disparate_impact": "inf" if math.isinf(di) else di,
            "equal_opportunity_difference": self.equal_opportunity_difference,
            "n_privileged": self.n_privileged,
            "n_unprivileged": self.n_unprivileged,
        }


def fairness(rows, attribute: str, privileged_group: str, favorable_label: str) -> FairnessResult:
    """Group fairness on predictions.

    SPD = P(pred = favorable | unprivileged) - P(pred = favorable | privileged)
    DI  = the ratio of those rates (+inf when only the privileged rate is 0,
          1 when both are 0)
    EOD = TPR_unprivileged - TPR_privileged over truly-favorable rows; absent
          when either group has no truly-favorable rows.
    """
    priv = []
    unpriv = []
    for r in rows:
        if attribute not in r.attrs:
            raise TrustPipeError(f"unknown attribute {attribute!r} on sample {r.sample_id}")
        (priv if str(r.attrs[attribute]) == privileged_group else unpriv).append(r)
    if not priv or not unpriv:
        raise TrustPipeError(
            f"empty {'privileged' if not priv else 'unprivileged'} partition for {attribute!r}"
        )

    def fav_rate(group):
        return sum(1 for r in group if r.y_pred == favorable_label) / len(group)

    p_priv = fav_rate(priv)
    p_unpriv = fav_rate(unpriv)
    spd = p_unpriv - p_priv
    if p_priv == 0.0:
        di = 1.0 if p_unpriv == 0.0 else math.inf
    else:
        di = p_unpriv / p_priv

    def tpr(group):
        pos = [r for r in group if r.y_true == favorable_label]
        if not pos:
            return None
        return sum(1 for r in pos if r.y_pred == favorable_label) / len(pos)

    t_priv = tpr(priv)
    t_unpriv = tpr(unpriv)
    eod = None if t_priv is None or t_unpriv is None else t_unpriv - t_priv
    return FairnessResult(
        attribute=attribute,
        privileged_group=privileged_group,
        favorable_label=favorable_label,
        statistical_parity_difference=spd,
        disparate_impact=di,
        equal_opportunity_difference=eod,
        n_privileged=len(priv),
        n_unprivileged=len(unpriv),
    )


def fairness_report(rows, specs, favorable_label: str) -> dict:
    """Multi-attribute report; specs is a list of (attribute, privileged_group)."""
    return {
        "kind": "fairness",
        "favorable_label": favorable_label,
        "attributes": {
            attr: fairness(rows, attr, priv, favorable_label).to_dict() for attr, priv in specs
        },
    }
