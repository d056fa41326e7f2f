"""Blessing gate and serving stub.

A blessing policy is a ';'-separated list of threshold rules over dotted
metric paths into the gate's subject documents, e.g.

    model.metrics.holdout_accuracy >= 0.7; report.attributes.gender.disparate_impact within 0.8 1.25

Evaluating a policy yields a canonical blessing record. Publication admits
only blessed digests, assigns monotonic revisions, and is idempotent per
digest. The serving state routes a seeded fraction of traffic to a canary
revision and promotes it when the weight reaches 1.
"""

from __future__ import annotations

import hashlib
import math
import re
import threading
from dataclasses import dataclass

from .docfmt import canonical_json
from .errors import ConflictError, InvariantError, NotFoundError, TrustPipeError

_PATH_RE = re.compile(r"^[A-Za-z0-9_-]+(\.[A-Za-z0-9_-]+)+$")


@dataclass(frozen=True)
class Rule:
    path: tuple
    op: str  # "ge" | "le" | "within"
    lo: float
    hi: float | None
    text: str


@dataclass(frozen=True)
class BlessingPolicy:
    rules: tuple
    text: str  # canonical rendering

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()


def _num(token: str, rule: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise InvariantError(f"policy rule {rule!r}: {token!r} is not a number") from None


def parse_policy(text: str) -> BlessingPolicy:
    """Parse the rule list; an empty policy is legal but flagged on evaluation."""
    rules = []
    rendered = []
    for raw in text.split(";"):
        raw = raw.strip()
        if not raw:
            continue
        parts = raw.split()
        if len(parts) < 3:
            raise InvariantError(f"policy rule {raw!r}: expected 'path op value'")
        path, op = parts[0], parts[1]
        if not _PATH_RE.match(path):
            raise InvariantError(f"policy rule {raw!r}: malformed metric path {path!r}")
        if op == ">=" and len(parts) == 3:
            lo, hi = _num(parts[2], raw), None
            kind = "ge"
            canon = f"{path} >= {_fmt(lo)}"
        elif op == "<=" and len(parts) == 3:
            lo, hi = _num(parts[2], raw), None
            kind = "le"
            canon = f"{path} <= {_fmt(lo)}"
        elif op == "within" and len(parts) == 4:
            lo, hi = _num(parts[2], raw), _num(parts[3], raw)
            if lo > hi:
                raise InvariantError(f"policy rule {raw!r}: empty interval")
            kind = "within"
            canon = f"{path} within {_fmt(lo)} {_fmt(hi)}"
        else:
            raise InvariantError(
                f"policy rule {raw!r}: operator must be '>=', '<=' or 'within lo hi'"
            )
        rules.append(Rule(tuple(path.split(".")), kind, lo, hi, canon))
        rendered.append(canon)
    return BlessingPolicy(tuple(rules), "; ".join(rendered))


def _fmt(v: float) -> str:
    return "%.12g" % v


def _lookup(subjects: dict, path: tuple):
    cur = subjects
    for seg in path:
        if not isinstance(cur, dict) or seg not in cur:
            return None, f"path {'.'.join(path)} not found"
        cur = cur[seg]
    if cur == "inf":  # serialized +inf in fairness reports
        cur = math.inf
    if isinstance(cur, bool) or not isinstance(cur, (int, float)):
        return None, f"path {'.'.join(path)} is not numeric"
    return float(cur), None


def evaluate_policy(policy: BlessingPolicy, subjects: dict, asset_digest: str) -> dict:
    """Apply every rule; a missing or non-numeric path fails its rule.

    Returns the blessing record as a plain dict; serialize with
    canonical_json for a content-addressable artifact.
    """
    outcomes = []
    warnings = []
    blessed = True
    for rule in policy.rules:
        value, reason = _lookup(subjects, rule.path)
        if value is None:
            passed = False
        elif rule.op == "ge":
            passed = value >= rule.lo
        elif rule.op == "le":
            passed = value <= rule.lo
        else:
            passed = rule.lo <= value <= rule.hi
        if value is not None and not passed:
            reason = "value outside threshold"
        outcomes.append(
            {
                "rule": rule.text,
                "value": ("inf" if value is not None and math.isinf(value) else value),
                "passed": passed,
                **({"reason": reason} if reason else {}),
            }
        )
        blessed = blessed and passed
    if not policy.rules:
        warnings.append("empty policy: blessing granted without any checks")
    return {
        "kind": "blessing-record",
        "asset": asset_digest,
        "policy": policy.text,
        "policy_digest": policy.digest,
        "decision": "blessed" if blessed else "rejected",
        "rules": outcomes,
        **({"warnings": warnings} if warnings else {}),
    }


def record_json(record: dict) -> str:
    return canonical_json(record)


# ---------------------------------------------------------------------------
# publication


class ModelRegistry:
    """Blessed-only model publication with monotonic revisions per model id."""

    def __init__(self):
        self._lock = threading.Lock()
        self._revisions: dict[str, list] = {}  # model_id -> [(revision, digest, record)]

    def publish(self, model_id: str, digest: str, record: dict) -> int:
        if record.get("kind") != "blessing-record":
            raise InvariantError("publication requires a blessing record")
        if record.get("decision") != "blessed":
            raise ConflictError(f"model {model_id}: digest {digest[:12]} is not blessed")
        if record.get("asset") != digest:
            raise ConflictError(
                f"model {model_id}: blessing record covers a different digest"
            )
        with self._lock:
            revs = self._revisions.setdefault(model_id, [])
            for rev, d, _ in revs:
                if d == digest:
                    return rev  # idempotent per digest
            rev = revs[-1][0] + 1 if revs else 1
            revs.append((rev, digest, record))
            return rev

    def revisions(self, model_id: str) -> list:
        return [
            {"revision": r, "digest": d, "policy_digest": rec["policy_digest"]}
            for r, d, rec in self._revisions.get(model_id, [])
        ]

    def digest_for(self, model_id: str, revision: int) -> str:
        for r, d, _ in self._revisions.get(model_id, []):
            if r == revision:
                return d
        raise NotFoundError(f"model {model_id} has no revision {revision}")

    def latest(self, model_id: str):
        revs = self._revisions.get(model_id)
        if not revs:
            raise NotFoundError(f"no published revisions for model {model_id}")
        return revs[-1][0], revs[-1][1]


# ---------------------------------------------------------------------------
# serving


class ServingState:
    """Stable/canary router with seeded traffic splitting and simulated
    scale-to-zero.

    The clock is injected via tick(); core logic never reads the OS clock.
    Every model starts at zero replicas, so its first request (and the first
    request after an idle period of at least idle_timeout_s) records exactly
    one cold start. `resolver(digest)` must return an object exposing
    predict_proba_image plus a bundle with ordered labels.
    """

    def __init__(self, registry: ModelRegistry, resolver, seed: int = 0,
                 idle_timeout_s: float = 60.0):
        import random

        self.registry = registry
        self.resolver = resolver
        self.idle_timeout_s = idle_timeout_s
        self._rng = random.Random(seed)
        self._lock = threading.Lock()
        self._stable: dict[str, str] = {}
        self._canary: dict[str, tuple] = {}  # model_id -> (digest, weight)
        self._replicas: dict[str, int] = {}
        self._now_ms = 0
        self.stats: dict[str, dict] = {}

    def _stat(self, model_id: str) -> dict:
        return self.stats.setdefault(
            model_id,
            {
                "requests": 0,
                "canary_requests": 0,
                "cold_starts": 0,
                "last_request_ms": None,
                "per_revision": {},
            },
        )

    def tick(self, now_ms: int):
        with self._lock:
            if now_ms < self._now_ms:
                raise TrustPipeError(f"clock regression: {now_ms} < {self._now_ms}")
            self._now_ms = now_ms
            idle_ms = self.idle_timeout_s * 1000.0
            for model_id, replicas in list(self._replicas.items()):
                if replicas == 0:
                    continue  # idempotent at zero
                last = self._stat(model_id)["last_request_ms"]
                if last is not None and now_ms - last >= idle_ms:
                    self._replicas[model_id] = 0

    def set_stable(self, model_id: str, revision: int):
        digest = self.registry.digest_for(model_id, revision)
        with self._lock:
            self._stable[model_id] = digest
            self._canary.pop(model_id, None)

    def set_canary(self, model_id: str, revision: int, weight: float):
        if not 0.0 <= weight <= 1.0:
            raise InvariantError("canary weight must be in [0, 1]")
        digest = self.registry.digest_for(model_id, revision)
        with self._lock:
            if model_id not in self._stable:
                if weight != 1.0:
                    raise ConflictError(
                        f"model {model_id} has no stable revision to split against"
                    )
                self._stable[model_id] = digest
                return
            if weight == 1.0:  # promotion retires the old revision
                self._stable[model_id] = digest
                self._canary.pop(model_id, None)
            else:
                self._canary[model_id] = (digest, weight)

    def routes(self, model_id: str) -> dict:
        with self._lock:
            stable = self._stable.get(model_id)
            canary = self._canary.get(model_id)
            replicas = self._replicas.get(model_id, 0)
        weights = None
        if stable is not None:
            w = canary[1] if canary else 0.0
            weights = {"stable": 1.0 - w, **({"canary": w} if canary else {})}
        return {
            "stable": stable,
            "canary": ({"digest": canary[0], "weight": canary[1]} if canary else None),
            "weights": weights,
            "replicas": replicas,
        }

    def predict(self, model_id: str, image) -> dict:
        with self._lock:
            stable = self._stable.get(model_id)
            if stable is None:
                raise NotFoundError(f"no serving revision for model {model_id}")
            stats = self._stat(model_id)
            canary = self._canary.get(model_id)
            cold = self._replicas.get(model_id, 0) == 0
            if cold:
                stats["cold_starts"] += 1
                self._replicas[model_id] = 1
            track = "stable"
            digest = stable
            if canary is not None and self._rng.random() < canary[1]:
                track, digest = "canary", canary[0]
            stats["requests"] += 1
            if track == "canary":
                stats["canary_requests"] += 1
            stats["per_revision"][digest] = stats["per_revision"].get(digest, 0) + 1
            stats["last_request_ms"] = self._now_ms
        model = self.resolver(digest)
        probs = model.predict_proba_image(image)
        labels = model.bundle.labels
        best = max(range(len(labels)), key=lambda i: probs[i])
        return {
            "model": model_id,
            "served": digest,
            "track": track,
            "cold_start": cold,
            "label": labels[best],
            "probs": {labels[i]: float(probs[i]) for i in range(len(labels))},
        }
