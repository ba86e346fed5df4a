"""Grid sampling: spread exemplar picks across occupied cells.

Occupied cells are visited round-robin in row-major order starting at a
seeded offset.  Each visit takes one not-yet-selected point from the cell:
the one closest to the cell's geometric centre (ties to the lower index), or
a uniformly random one with ``pick="random"``.  Exhausted cells are skipped,
so every occupied cell contributes once before any contributes twice.

``mode="proportional"`` instead gives each occupied cell a quota of
``m * count / N`` picks (largest remainders first, ties in visit order) and
fills the quotas in the same visit order.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass
class ExemplarSet:
    indices: np.ndarray
    cells: np.ndarray  # (m, 2) row/col per exemplar

    def __len__(self):
        return self.indices.size


def keep_ratio_to_m(keep_ratio, n):
    if not 0 < keep_ratio <= 1:
        raise ValidationError(f"keep ratio must lie in (0, 1], got {keep_ratio}")
    return int(min(n, max(1, round(keep_ratio * n))))


def _rng(seed):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def cell_centres(spec):
    g = spec.g
    r = spec.base[0] + (np.arange(g) + 0.5) * spec.cell_size[0]
    c = spec.base[1] + (np.arange(g) + 0.5) * spec.cell_size[1]
    return r, c


def proportional_quota(sizes, m):
    """Largest-remainder split of ``m`` picks over cells of the given sizes."""
    sizes = np.asarray(sizes, dtype=np.int64)
    exact = m * sizes / sizes.sum()
    quota = np.floor(exact).astype(np.int64)
    left = m - int(quota.sum())
    order = np.lexsort((np.arange(sizes.size), -(exact - quota)))
    quota[order[:left]] += 1
    return quota


def grid_sample(coords, h, m, seed=0, pick="centroid", mode="round-robin"):
    """Pick ``m`` distinct indices from the embedding, one cell at a time."""
    y = np.asarray(coords, dtype=np.float64)
    n = y.shape[0]
    if not 1 <= m <= n:
        raise ValidationError(f"exemplar count must lie in [1, {n}], got {m}")
    if pick not in ("centroid", "random"):
        raise ValidationError(f"unknown pick rule {pick!r}")
    if mode not in ("round-robin", "proportional"):
        raise ValidationError(f"unknown sampling mode {mode!r}")
    g = h.spec.g
    flat = h.cells[:, 0] * g + h.cells[:, 1]
    occupied = np.unique(flat)
    rng = _rng(seed)
    start = int(rng.integers(occupied.size))
    visit = np.roll(occupied, -start)

    # per-cell queues in pick order
    queues = []
    if pick == "centroid":
        cr, cc = cell_centres(h.spec)
    for cell in visit:
        members = np.flatnonzero(flat == cell)
        if pick == "centroid":
            r, c = divmod(int(cell), g)
            d = (y[members, 0] - cr[r]) ** 2 + (y[members, 1] - cc[c]) ** 2
            members = members[np.lexsort((members, d))]
        else:
            members = members[rng.permutation(members.size)]
        queues.append(members)
    if mode == "proportional":
        quota = proportional_quota([q.size for q in queues], m)
        queues = [q[:k] for q, k in zip(queues, quota)]

    out = np.empty(m, dtype=np.int64)
    cells = np.empty((m, 2), dtype=np.int64)
    depth = 0
    k = 0
    while k < m:
        for q, cell in zip(queues, visit):
            if depth < q.size:
                out[k] = q[depth]
                cells[k] = divmod(int(cell), g)
                k += 1
                if k == m:
                    break
        depth += 1
    return ExemplarSet(out, cells)
