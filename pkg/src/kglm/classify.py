"""Triple classification with per-relation score thresholds.

Thresholds are chosen on validation pairs to maximize accuracy under
the rule "positive iff score >= threshold"; test triples of relations
unseen in validation fall back to a global threshold. Negatives are
supplied or generated by seeded corruption, one per positive.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import seeds
from .scoring import sample_negatives

logger = logging.getLogger(__name__)


def best_threshold(pos_scores, neg_scores):
    """(threshold, accuracy) maximizing accuracy of "score >= thr";
    ties resolve to the smallest threshold."""
    pos = np.sort(np.asarray(pos_scores, dtype=np.float64))
    neg = np.sort(np.asarray(neg_scores, dtype=np.float64))
    allv = np.concatenate([pos, neg])
    candidates = np.unique(allv)
    candidates = np.append(candidates, candidates[-1] + 1.0)  # all-negative option
    n = len(allv)
    pos_right = len(pos) - np.searchsorted(pos, candidates, side="left")
    neg_right = np.searchsorted(neg, candidates, side="left")
    acc = (pos_right + neg_right) / n
    k = int(np.argmax(acc))
    return float(candidates[k]), float(acc[k])


@dataclass
class ClassificationResult:
    valid_accuracy: float
    test_accuracy: float
    per_relation_test: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    global_threshold: float = 0.0
    fallback_relations: list = field(default_factory=list)


def _scores(scorer, triples):
    return np.array([scorer.score(int(h), int(r), int(t)) for h, r, t in triples])


def triple_classification_eval(
    scorer,
    valid_pos,
    test_pos,
    valid_neg=None,
    test_neg=None,
    known=None,
    n_entities=None,
    seed=seeds.DEFAULT_SEED,
):
    """Fit per-relation thresholds on validation, classify test.

    Negatives may be passed explicitly; otherwise they are generated by
    corrupting one side per positive with a seeded stream (requires
    ``known`` and ``n_entities``).
    """
    valid_pos = np.asarray(valid_pos, dtype=np.int64)
    test_pos = np.asarray(test_pos, dtype=np.int64)
    if valid_neg is None:
        rng = seeds.derived_rng(seed, seeds.CLASSIFY_NEGATIVES, 0)
        valid_neg = sample_negatives(valid_pos, n_entities, known, rng)
    if test_neg is None:
        rng = seeds.derived_rng(seed, seeds.CLASSIFY_NEGATIVES, 1)
        test_neg = sample_negatives(test_pos, n_entities, known, rng)
    valid_neg = np.asarray(valid_neg, dtype=np.int64)
    test_neg = np.asarray(test_neg, dtype=np.int64)

    vp_scores = _scores(scorer, valid_pos)
    vn_scores = _scores(scorer, valid_neg)
    global_thr, _ = best_threshold(vp_scores, vn_scores)

    thresholds = {}
    for r in np.unique(np.concatenate([valid_pos[:, 1], valid_neg[:, 1]])):
        pm = valid_pos[:, 1] == r
        nm = valid_neg[:, 1] == r
        if not pm.any() and not nm.any():
            continue
        if not pm.any() or not nm.any():
            # one-sided relation: fall back to the global threshold
            continue
        thresholds[int(r)] = best_threshold(vp_scores[pm], vn_scores[nm])[0]

    def _classify(pos, neg, pos_scores, neg_scores, fallback_log):
        correct = 0
        per_rel = {}
        for (h, r, t), s in zip(pos, pos_scores):
            thr = thresholds.get(int(r))
            if thr is None:
                fallback_log.add(int(r))
                thr = global_thr
            ok = s >= thr
            correct += ok
            stat = per_rel.setdefault(int(r), [0, 0])
            stat[0] += ok
            stat[1] += 1
        for (h, r, t), s in zip(neg, neg_scores):
            thr = thresholds.get(int(r))
            if thr is None:
                fallback_log.add(int(r))
                thr = global_thr
            ok = s < thr
            correct += ok
            stat = per_rel.setdefault(int(r), [0, 0])
            stat[0] += ok
            stat[1] += 1
        n = len(pos) + len(neg)
        return correct / n, {r: c / m for r, (c, m) in per_rel.items()}

    fallback = set()
    valid_acc, _ = _classify(valid_pos, valid_neg, vp_scores, vn_scores, fallback)
    tp_scores = _scores(scorer, test_pos)
    tn_scores = _scores(scorer, test_neg)
    test_acc, per_rel = _classify(test_pos, test_neg, tp_scores, tn_scores, fallback)
    if fallback:
        logger.warning(
            "%d relations had no two-sided validation data; used the global threshold", len(fallback)
        )
    return ClassificationResult(
        valid_accuracy=float(valid_acc),
        test_accuracy=float(test_acc),
        per_relation_test=per_rel,
        thresholds=thresholds,
        global_threshold=global_thr,
        fallback_relations=sorted(fallback),
    )


def write_classification_report(result, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"accuracy\tvalid\t{result.valid_accuracy:.6f}\n")
        fh.write(f"accuracy\ttest\t{result.test_accuracy:.6f}\n")
        for r in sorted(result.per_relation_test):
            fh.write(f"accuracy\trelation:{r}\t{result.per_relation_test[r]:.6f}\n")
