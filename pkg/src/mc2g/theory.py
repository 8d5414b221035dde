"""Closed-form information quantities and sample-complexity thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .core import NominalMatrix
from .genmodel import PersonalizationModel


def hellinger_sq(p, q) -> float:
    """Squared Hellinger distance 1 - sum_z sqrt(p(z) q(z))."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("distributions must share an alphabet")
    return float(max(0.0, 1.0 - np.sqrt(p * q).sum()))


def _block_distributions(nm: NominalMatrix, pm: PersonalizationModel) -> np.ndarray:
    """Q_ab rows as a k1 x k2 x |Z| array."""
    return pm.conditional[nm.block]


def cluster_discrepancies(nm: NominalMatrix, pm: PersonalizationModel):
    """Minimal pairwise Hellinger discrepancies (d_user, d_item).

    Returns (d_user, d_item, user_pair, item_pair) where the pairs attain
    the minima. A zero discrepancy means the corresponding clusters are
    statistically indistinguishable from ratings alone.
    """
    k1, k2 = nm.user_labels.k, nm.item_labels.k
    if k1 < 2 or k2 < 2:
        raise ValueError("need at least two clusters on each side")
    q = _block_distributions(nm, pm)
    d_user, user_pair = math.inf, None
    for a in range(k1):
        for a2 in range(a + 1, k1):
            d = sum(hellinger_sq(q[a, b], q[a2, b]) for b in range(k2))
            if d < d_user:
                d_user, user_pair = d, (a, a2)
    d_item, item_pair = math.inf, None
    for b in range(k2):
        for b2 in range(b + 1, k2):
            d = sum(hellinger_sq(q[a, b], q[a, b2]) for a in range(k1))
            if d < d_item:
                d_item, item_pair = d, (b, b2)
    return d_user, d_item, user_pair, item_pair


def _threshold(n, m, k1, k2, i1, i2, d_user, d_item, user_coeff, item_coeff):
    """max of the two arms, each bracket floored at 0 ("graphs alone suffice")."""
    user_bracket = max(0.0, user_coeff - i1 / k1)
    item_bracket = max(0.0, item_coeff - i2 / k2)
    if user_bracket > 0 and d_user <= 0:
        raise ValueError("user-cluster discrepancy is zero: some pair of user "
                         "clusters is unidentifiable from ratings")
    if item_bracket > 0 and d_item <= 0:
        raise ValueError("item-cluster discrepancy is zero: some pair of item "
                         "clusters is unidentifiable from ratings")
    user_arm = user_bracket * n * math.log(n) / (d_user / k2) if user_bracket > 0 else 0.0
    item_arm = item_bracket * m * math.log(m) / (d_item / k1) if item_bracket > 0 else 0.0
    return max(user_arm, item_arm)


def achievability_threshold(n, m, k1, k2, i1, i2, d_user, d_item,
                            eps: float = 0.0) -> float:
    """Expected sample count above which the four-stage algorithm succeeds."""
    return _threshold(n, m, k1, k2, i1, i2, d_user, d_item,
                      1.0 + eps, 1.0 + eps)


def converse_threshold(n, m, k1, k2, i1, i2, d_user, d_item,
                       eps: float = 0.0) -> float:
    """Expected sample count below which every estimator must fail."""
    return _threshold(n, m, k1, k2, i1, i2, d_user, d_item,
                      (1.0 - eps) / 2.0, (1.0 - eps) / 2.0)


def normalized_complexity(mnp_actual: float, threshold_at_eps0: float) -> float:
    """mnp divided by the eps=0 achievability threshold (phase-transition x-axis)."""
    if threshold_at_eps0 <= 0:
        raise ValueError("threshold is zero: graphs alone suffice, "
                         "normalization undefined")
    return mnp_actual / threshold_at_eps0


def compute_graph_quality(n: int, alpha: float, beta: float) -> float:
    """Graph quality n (sqrt(alpha) - sqrt(beta))^2 / log n (natural log)."""
    if not 0.0 <= beta <= alpha <= 1.0:
        raise ValueError("need 0 <= beta <= alpha <= 1 (homophily)")
    return n * (math.sqrt(alpha) - math.sqrt(beta)) ** 2 / math.log(n)


@dataclass(frozen=True)
class ThresholdReport:
    """All information quantities for one scenario, JSON-serializable."""

    n: int
    m: int
    k1: int
    k2: int
    i1: float
    i2: float
    d_user: float
    d_item: float
    user_pair: tuple
    item_pair: tuple
    achievability: float
    converse: float
    eps: float
    normalized_complexity: float | None = None

    def to_jsonable(self) -> dict:
        out = asdict(self)
        out["user_pair"] = list(self.user_pair)
        out["item_pair"] = list(self.item_pair)
        return out


def build_threshold_report(n, m, k1, k2, i1, i2, nm: NominalMatrix,
                           pm: PersonalizationModel, eps: float = 0.0,
                           p: float | None = None) -> ThresholdReport:
    d_user, d_item, user_pair, item_pair = cluster_discrepancies(nm, pm)
    if d_user <= 0:
        raise ValueError(f"user clusters {user_pair} are unidentifiable "
                         "(zero rating discrepancy)")
    if d_item <= 0:
        raise ValueError(f"item clusters {item_pair} are unidentifiable "
                         "(zero rating discrepancy)")
    ach = achievability_threshold(n, m, k1, k2, i1, i2, d_user, d_item, eps)
    con = converse_threshold(n, m, k1, k2, i1, i2, d_user, d_item, eps)
    norm = None
    if p is not None:
        base = achievability_threshold(n, m, k1, k2, i1, i2, d_user, d_item, 0.0)
        norm = normalized_complexity(m * n * p, base)
    return ThresholdReport(n, m, k1, k2, i1, i2, d_user, d_item,
                           user_pair, item_pair, ach, con, eps, norm)
