"""Fast-gradient-sign robustness probe."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TrustPipeError


@dataclass(frozen=True)
class RobustnessReport:
    epsilons: tuple
    clean_accuracy: float
    robust_accuracy: tuple  # aligned with epsilons
    attack: str = "fgsm"

    def to_report(self) -> dict:
        return {
            "kind": "robustness",
            "attack": self.attack,
            "epsilons": list(self.epsilons),
            "clean_accuracy": self.clean_accuracy,
            "robust_accuracy": {
                # string keys keep the report canonical-JSON friendly
                ("%g" % e): a
                for e, a in zip(self.epsilons, self.robust_accuracy)
            },
        }


def fgsm_robustness(model, dataset, epsilons, clip=(0.0, 1.0)) -> RobustnessReport:
    """Sweep one-step sign perturbations over a labeled dataset.

    `model` must expose predict_proba(x) -> per-class probabilities and
    loss_grad(x, y_index) -> d(cross-entropy)/dx. `dataset` is a list of
    (x, y_index) pairs; `clip` bounds the perturbed input.
    """
    if not hasattr(model, "loss_grad"):
        raise TrustPipeError("model does not expose input gradients; cannot run fgsm")
    eps = [float(e) for e in epsilons]
    if any(e < 0 for e in eps):
        raise TrustPipeError("epsilons must be non-negative")
    lo, hi = clip

    xs = [np.asarray(x, dtype=np.float64) for x, _ in dataset]
    ys = [int(y) for _, y in dataset]
    if not xs:
        raise TrustPipeError("empty dataset")

    preds = [int(np.argmax(model.predict_proba(x))) for x in xs]
    clean = sum(1 for p, y in zip(preds, ys) if p == y) / len(ys)

    robust = []
    for e in eps:
        if e == 0.0:
            robust.append(clean)
            continue
        hits = 0
        for x, y in zip(xs, ys):
            g = np.asarray(model.loss_grad(x, y), dtype=np.float64)
            x_adv = np.clip(x + e * np.sign(g), lo, hi)
            if int(np.argmax(model.predict_proba(x_adv))) == y:
                hits += 1
        robust.append(hits / len(ys))
    return RobustnessReport(tuple(eps), clean, tuple(robust))
