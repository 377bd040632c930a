"""Classification evaluation: accuracy, micro/macro F1, per-class reports, zero-shot remap.

Macro-F1 averages per-class F1 over ALL K classes by default; classes with
zero support and zero predictions contribute F1 = 0, which makes the metric's
sensitivity to absent classes visible instead of hiding it. A flag restricts
the average to classes present in the gold labels. Micro-F1 pools TP/FP/FN
over classes and equals accuracy in single-label multiclass evaluation.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .corpus import Corpus, LabelSpace


@dataclass(frozen=True)
class ClassReport:
    label: int
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    micro_f1: float
    macro_f1: float
    per_class: tuple[ClassReport, ...]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_table(self) -> str:
        lines = [
            f"accuracy  {self.accuracy:.4f}",
            f"micro-F1  {self.micro_f1:.4f}",
            f"macro-F1  {self.macro_f1:.4f}",
            "",
            f"{'class':>8} {'precision':>9} {'recall':>9} {'f1':>9} {'support':>9}",
        ]
        for c in self.per_class:
            lines.append(
                f"{c.label:>8} {c.precision:>9.4f} {c.recall:>9.4f} {c.f1:>9.4f} {c.support:>9}"
            )
        return "\n".join(lines)


def evaluate(
    y_true, y_pred, n_classes: int, macro_over_present_only: bool = False
) -> EvalReport:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"label vectors differ in length: {y_true.shape} vs {y_pred.shape}")
    if len(y_true) == 0:
        raise ValueError("cannot evaluate zero instances")
    if y_true.min() < 0 or y_true.max() >= n_classes or y_pred.min() < 0 or y_pred.max() >= n_classes:
        raise ValueError(f"labels must lie in [0, {n_classes})")

    tp = np.zeros(n_classes, dtype=np.int64)
    fp = np.zeros(n_classes, dtype=np.int64)
    fn = np.zeros(n_classes, dtype=np.int64)
    support = np.bincount(y_true, minlength=n_classes)
    hits = y_true == y_pred
    np.add.at(tp, y_true[hits], 1)
    np.add.at(fp, y_pred[~hits], 1)
    np.add.at(fn, y_true[~hits], 1)

    def _safe(num, den):
        return num / den if den > 0 else 0.0

    per_class = []
    f1s = np.zeros(n_classes)
    for k in range(n_classes):
        prec = _safe(tp[k], tp[k] + fp[k])
        rec = _safe(tp[k], tp[k] + fn[k])
        f1 = _safe(2 * prec * rec, prec + rec)
        f1s[k] = f1
        per_class.append(
            ClassReport(label=k, precision=prec, recall=rec, f1=f1, support=int(support[k]))
        )

    accuracy = float(hits.mean())
    micro_p = _safe(tp.sum(), tp.sum() + fp.sum())
    micro_r = _safe(tp.sum(), tp.sum() + fn.sum())
    micro_f1 = _safe(2 * micro_p * micro_r, micro_p + micro_r)
    if macro_over_present_only:
        present = support > 0
        macro_f1 = float(f1s[present].mean()) if present.any() else 0.0
    else:
        macro_f1 = float(f1s.mean())
    per_class.sort(key=lambda c: (-c.support, c.label))
    return EvalReport(
        accuracy=accuracy,
        micro_f1=float(micro_f1),
        macro_f1=macro_f1,
        per_class=tuple(per_class),
    )


def zero_shot_remap(label_space_src: LabelSpace, corpus_tgt: Corpus):
    """Gold labels for a target corpus under the source label space.

    Vendors unknown to the source map to its others index. Returns
    (labels array, number of distinct remapped vendors).
    """
    labels = np.array(
        [label_space_src.label_for(ad.vendor_norm) for ad in corpus_tgt.ads], dtype=np.int64
    )
    remapped_vendors = {
        ad.vendor_norm for ad in corpus_tgt.ads if ad.vendor_norm not in label_space_src.class_of
    }
    return labels, len(remapped_vendors)
