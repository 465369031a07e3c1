"""Ground-plane detection (MODA/MODP) and tracking (CLEAR-MOT, IDF1) metrics.

Matching uses Euclidean distance on the ground plane; a pair is a true
positive when its distance is at most ``r`` (closed threshold).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .assoc.assignment import hungarian

MT_FRACTION = 0.8
ML_FRACTION = 0.2


class UndefinedMetricError(ValueError):
    """The metric is undefined for the given input (no ground truth)."""


@dataclass
class FrameMatching:
    pairs: list[tuple[int, int, float]] = field(default_factory=list)
    fn_count: int = 0
    fp_count: int = 0

    @property
    def tp_count(self) -> int:
        return len(self.pairs)


def _distances(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))


def match_frame(gt_points, pred_points, r: float) -> FrameMatching:
    """Optimal (min total distance, max cardinality) matching with pairs beyond ``r`` forbidden."""
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    gt_points, pred_points = list(gt_points), list(pred_points)
    dist = _distances(gt_points, pred_points)
    cost = np.where(dist <= r, dist, math.inf)
    result = hungarian(cost)
    pairs = [(g, p, float(dist[g, p])) for g, p in result.matches]
    return FrameMatching(pairs, len(gt_points) - len(pairs), len(pred_points) - len(pairs))


@dataclass
class DetectionMetrics:
    moda: float
    modp: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int
    gt_count: int


def detection_metrics(frames, r: float = 0.5, modp_mode: str = "normalized") -> DetectionMetrics:
    """Aggregate detection scores over ``frames`` of ``(gt_points, pred_points)``.

    ``modp_mode="normalized"`` gives the mean over true positives of ``1 - d / r``;
    ``"distance"`` gives the plain mean TP distance in meters instead.
    """
    if modp_mode not in ("normalized", "distance"):
        raise ValueError(f"unknown modp_mode {modp_mode!r}")
    tp = fp = fn = n_gt = 0
    dist_sum = 0.0
    for gt, pred in frames:
        m = match_frame(gt, pred, r)
        tp += m.tp_count
        fp += m.fp_count
        fn += m.fn_count
        n_gt += len(gt)
        dist_sum += sum(d for _, _, d in m.pairs)
    if n_gt == 0:
        raise UndefinedMetricError("detection metrics are undefined without ground truth")
    mean_d = dist_sum / tp if tp else 0.0
    if modp_mode == "normalized":
        modp = 1.0 - mean_d / r if tp else 0.0
    else:
        modp = mean_d
    return DetectionMetrics(
        moda=1.0 - (fn + fp) / n_gt,
        modp=modp,
        precision=tp / (tp + fp) if tp + fp else 0.0,
        recall=tp / n_gt,
        tp=tp,
        fp=fp,
        fn=fn,
        gt_count=n_gt,
    )


@dataclass
class ClearMot:
    mota: float
    motp: float
    idsw: int
    fp: int
    fn: int
    tp: int
    gt_count: int
    mt: float
    ml: float


def clear_mot(gt_tracks: dict, pred_tracks: dict, r: float = 1.0) -> ClearMot:
    """CLEAR-MOT over per-frame dicts ``{frame: [(id, x, y), ...]}``.

    Correspondences from earlier frames are kept while still within ``r``;
    the rest are matched optimally. An identity switch is counted whenever a
    ground-truth id is matched to a different track id than at its previous
    match.
    """
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    last_match: dict[int, int] = {}
    present: dict[int, int] = {}
    matched: dict[int, int] = {}
    tp = fp = fn = idsw = n_gt = 0
    dist_sum = 0.0
    for frame in sorted(set(gt_tracks) | set(pred_tracks)):
        gts = gt_tracks.get(frame, [])
        preds = pred_tracks.get(frame, [])
        n_gt += len(gts)
        for gid, _, _ in gts:
            present[gid] = present.get(gid, 0) + 1
        dist = _distances([(x, y) for _, x, y in gts], [(x, y) for _, x, y in preds])
        pred_index = {pid: j for j, (pid, _, _) in enumerate(preds)}

        pairs: list[tuple[int, int]] = []
        used_g, used_p = set(), set()
        for i, (gid, _, _) in enumerate(gts):
            j = pred_index.get(last_match.get(gid))
            if j is not None and j not in used_p and dist[i, j] <= r:
                pairs.append((i, j))
                used_g.add(i)
                used_p.add(j)

        rest_g = [i for i in range(len(gts)) if i not in used_g]
        rest_p = [j for j in range(len(preds)) if j not in used_p]
        if rest_g and rest_p:
            sub = dist[np.ix_(rest_g, rest_p)]
            result = hungarian(np.where(sub <= r, sub, math.inf))
            pairs.extend((rest_g[a], rest_p[b]) for a, b in result.matches)

        for i, j in pairs:
            gid, pid = gts[i][0], preds[j][0]
            if gid in last_match and last_match[gid] != pid:
                idsw += 1
            last_match[gid] = pid
            matched[gid] = matched.get(gid, 0) + 1
            dist_sum += float(dist[i, j])
        tp += len(pairs)
        fn += len(gts) - len(pairs)
        fp += len(preds) - len(pairs)

    if n_gt == 0:
        raise UndefinedMetricError("CLEAR-MOT metrics are undefined without ground truth")
    ratios = [matched.get(g, 0) / n for g, n in present.items()]
    return ClearMot(
        mota=1.0 - (fn + fp + idsw) / n_gt,
        motp=1.0 - (dist_sum / tp) / r if tp else 0.0,
        idsw=idsw,
        fp=fp,
        fn=fn,
        tp=tp,
        gt_count=n_gt,
        mt=sum(q >= MT_FRACTION for q in ratios) / len(ratios),
        ml=sum(q <= ML_FRACTION for q in ratios) / len(ratios),
    )


@dataclass
class IdMetrics:
    idf1: float
    idtp: int
    idfp: int
    idfn: int


def id_metrics(gt_tracks: dict, pred_tracks: dict, r: float = 1.0) -> IdMetrics:
    """Identity-level scores from the GT-id / track-id bijection that maximizes IDTP."""
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    gt_ids = sorted({g for objs in gt_tracks.values() for g, _, _ in objs})
    pred_ids = sorted({p for objs in pred_tracks.values() for p, _, _ in objs})
    n_gt = sum(len(v) for v in gt_tracks.values())
    n_pred = sum(len(v) for v in pred_tracks.values())
    if n_gt == 0:
        raise UndefinedMetricError("IDF1 is undefined without ground truth")
    gi = {g: k for k, g in enumerate(gt_ids)}
    pi = {p: k for k, p in enumerate(pred_ids)}
    overlap = np.zeros((len(gt_ids), len(pred_ids)), dtype=np.int64)
    for frame, gts in gt_tracks.items():
        preds = pred_tracks.get(frame, [])
        if not gts or not preds:
            continue
        close = _distances([(x, y) for _, x, y in gts], [(x, y) for _, x, y in preds]) <= r
        for a, b in zip(*np.nonzero(close)):
            overlap[gi[gts[a][0]], pi[preds[b][0]]] += 1
    idtp = 0
    if overlap.size:
        result = hungarian(-overlap.astype(float))
        idtp = int(sum(overlap[a, b] for a, b in result.matches))
    return IdMetrics(
        idf1=2 * idtp / (n_gt + n_pred),
        idtp=idtp,
        idfp=n_pred - idtp,
        idfn=n_gt - idtp,
    )


def idf1(gt_tracks: dict, pred_tracks: dict, r: float = 1.0) -> float:
    return id_metrics(gt_tracks, pred_tracks, r).idf1


@dataclass
class MetricsReport:
    mota: float
    motp: float
    idf1: float
    mt: float
    ml: float
    idsw: int
    fp: int
    fn: int
    gt_count: int
    moda: float | None = None
    modp: float | None = None
    precision: float | None = None
    recall: float | None = None
    det_tp: int | None = None
    det_fp: int | None = None
    det_fn: int | None = None
    det_r: float = 0.5
    track_r: float = 1.0

    PERCENT_FIELDS = ("moda", "modp", "precision", "recall", "idf1", "mota", "motp", "mt", "ml")

    def percent(self) -> dict[str, float | None]:
        return {
            k.upper(): None if getattr(self, k) is None else round(100.0 * getattr(self, k), 1)
            for k in self.PERCENT_FIELDS
        }

    def to_dict(self) -> dict:
        out = asdict(self)
        out["percent"] = self.percent()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    def tsv_header(self) -> str:
        return "\t".join([k.upper() for k in self.PERCENT_FIELDS] + ["IDSW"])

    def to_tsv(self) -> str:
        cells = ["-" if v is None else f"{v:.1f}" for v in self.percent().values()]
        return "\t".join(cells + [str(self.idsw)])


def evaluate(gt_tracks: dict, pred_tracks: dict, detections: dict | None = None, det_r: float = 0.5, track_r: float = 1.0) -> MetricsReport:
    """Full report. ``detections`` maps frame to a list of ``(x, y)`` points."""
    clear = clear_mot(gt_tracks, pred_tracks, track_r)
    ident = id_metrics(gt_tracks, pred_tracks, track_r)
    report = MetricsReport(
        mota=clear.mota,
        motp=clear.motp,
        idf1=ident.idf1,
        mt=clear.mt,
        ml=clear.ml,
        idsw=clear.idsw,
        fp=clear.fp,
        fn=clear.fn,
        gt_count=clear.gt_count,
        det_r=det_r,
        track_r=track_r,
    )
    if detections is not None:
        frames = sorted(set(gt_tracks) | set(detections))
        det = detection_metrics(
            [([(x, y) for _, x, y in gt_tracks.get(f, [])], detections.get(f, [])) for f in frames], det_r
        )
        report.moda, report.modp = det.moda, det.modp
        report.precision, report.recall = det.precision, det.recall
        report.det_tp, report.det_fp, report.det_fn = det.tp, det.fp, det.fn
    return report
