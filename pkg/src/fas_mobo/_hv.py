"""Bi-objective hypervolume primitives on plain arrays (maximization)."""
import numpy as np


def nondominated_mask(points: np.ndarray) -> np.ndarray:
    """Mask of rows not dominated by any other row (weak >= everywhere, > somewhere).

    Exact duplicates do not dominate each other. O(n log n) by sorting on x.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(points)
    if n == 0:
        return np.zeros(0, dtype=bool)
    x, y = points[:, 0], points[:, 1]
    order = np.lexsort((-y, -x))
    xs, ys = x[order], y[order]
    # Group rows sharing the same x; first row of each group carries the group's max y.
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    group = np.cumsum(np.r_[True, xs[1:] != xs[:-1]]) - 1
    group_max = ys[starts]
    # Best y among rows with strictly larger x.
    better_x = np.r_[-np.inf, np.maximum.accumulate(group_max)[:-1]]
    dominated = (better_x[group] >= ys) | (group_max[group] > ys)
    mask = np.empty(n, dtype=bool)
    mask[order] = ~dominated
    return mask


def hypervolume_2d(points: np.ndarray, ref) -> float:
    """Area dominated by ``points`` above ``ref``; rows may be in any order or dominated."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    ref = np.asarray(ref, dtype=float)
    points = points[np.all(points > ref, axis=1)]
    if len(points) == 0:
        return 0.0
    order = np.argsort(-points[:, 0], kind="stable")
    x = points[order, 0]
    ymax = np.maximum.accumulate(points[order, 1])
    widths = x - np.append(x[1:], ref[0])
    return float(np.sum(widths * (ymax - ref[1])))


def staircase(front: np.ndarray, ref) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Segments (lo, hi, height) of the attained-region boundary, x ascending intervals."""
    front = np.asarray(front, dtype=float).reshape(-1, 2)
    ref = np.asarray(ref, dtype=float)
    front = front[np.all(front > ref, axis=1)]
    if len(front):
        front = front[nondominated_mask(front)]
        front = front[np.argsort(-front[:, 0], kind="stable")]
    xs = front[:, 0]
    # Segment 0 lies right of the largest x, at the reference height.
    hi = np.concatenate([[np.inf], xs])
    lo = np.concatenate([xs, [ref[0]]])
    height = np.concatenate([[ref[1]], front[:, 1]])
    return lo, hi, height


def hvi_batch(candidates: np.ndarray, front: np.ndarray, ref) -> np.ndarray:
    """Hypervolume improvement of each candidate row (any leading shape) w.r.t. ``front``."""
    candidates = np.asarray(candidates, dtype=float)
    ref = np.asarray(ref, dtype=float)
    lo, hi, height = staircase(front, ref)
    cx = candidates[..., 0:1]
    cy = candidates[..., 1:2]
    width = np.clip(np.minimum(cx, hi) - lo, 0.0, None)
    gain = np.clip(cy - height, 0.0, None)
    return np.sum(width * gain, axis=-1)


def exclusive_contributions(points: np.ndarray, ref) -> np.ndarray:
    """Leave-one-out hypervolume loss of every row."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    total = hypervolume_2d(points, ref)
    keep = np.ones(len(points), dtype=bool)
    out = np.empty(len(points))
    for i in range(len(points)):
        keep[i] = False
        out[i] = total - hypervolume_2d(points[keep], ref)
        keep[i] = True
    return out
