"""
Feeder placement, injection schedules and in-array propagation paths.

Conventional arrays feed the horizontal operand into column 0 and the vertical
operand into row 0, skewing row/column d by d cycles. Axon feeds both operands
into the principal-diagonal PE (i, i) with no skew and lets them spread in both
directions. On a rectangular Axon array the columns (rows) past the diagonal are
fed from the bottom (right) edge, zero-padded by their distance past it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import Orchestration

BUBBLE = -1


def arrival_cycle(orchestration: Orchestration | str, i: int, j: int, k: int) -> int:
    """Cycle at which both operands with temporal index ``k`` are present at PE(i, j)."""
    if Orchestration(orchestration) is Orchestration.CONVENTIONAL:
        return k + i + j
    return k + abs(i - j)


def row_feeder(orchestration, rows: int, cols: int, i: int) -> int:
    """Column of the PE that receives row ``i``'s horizontal stream from the buffer."""
    if Orchestration(orchestration) is Orchestration.CONVENTIONAL:
        return 0
    return i if i < cols else cols - 1


def col_feeder(orchestration, rows: int, cols: int, j: int) -> int:
    """Row of the PE that receives column ``j``'s vertical stream from the buffer."""
    if Orchestration(orchestration) is Orchestration.CONVENTIONAL:
        return 0
    return j if j < rows else rows - 1


def row_delay(orchestration, rows: int, cols: int, i: int) -> int:
    """Leading bubbles (skew or zero padding) before row ``i``'s first element."""
    if Orchestration(orchestration) is Orchestration.CONVENTIONAL:
        return i
    return max(0, i - (cols - 1))


def col_delay(orchestration, rows: int, cols: int, j: int) -> int:
    if Orchestration(orchestration) is Orchestration.CONVENTIONAL:
        return j
    return max(0, j - (rows - 1))


def zero_pad_depth(rows: int, cols: int, j: int) -> int:
    """Axon zero padding for column ``j`` on a wide array (0 for diagonal columns)."""
    return col_delay(Orchestration.AXON, rows, cols, j)


@dataclass(frozen=True)
class FeedSchedule:
    """Where and when each operand stream enters the array."""

    orchestration: Orchestration
    rows: int
    cols: int
    row_feeders: tuple[int, ...]  # column index, per row
    row_delays: tuple[int, ...]
    col_feeders: tuple[int, ...]  # row index, per column
    col_delays: tuple[int, ...]

    @classmethod
    def build(cls, orchestration, rows: int, cols: int) -> "FeedSchedule":
        o = Orchestration(orchestration)
        return cls(
            o, rows, cols,
            tuple(row_feeder(o, rows, cols, i) for i in range(rows)),
            tuple(row_delay(o, rows, cols, i) for i in range(rows)),
            tuple(col_feeder(o, rows, cols, j) for j in range(cols)),
            tuple(col_delay(o, rows, cols, j) for j in range(cols)),
        )

    def feeder_pes(self) -> set[tuple[int, int]]:
        pes = {(i, f) for i, f in enumerate(self.row_feeders)}
        pes |= {(f, j) for j, f in enumerate(self.col_feeders)}
        return pes

    def row_index(self, i: int, cycle: int, t: int) -> int:
        """Temporal index injected into row ``i`` at ``cycle``, or BUBBLE."""
        k = cycle - self.row_delays[i]
        return k if 0 <= k < t else BUBBLE

    def col_index(self, j: int, cycle: int, t: int) -> int:
        k = cycle - self.col_delays[j]
        return k if 0 <= k < t else BUBBLE


@dataclass(frozen=True)
class PEGrid:
    """
    Static wiring of one array: for every PE, the flat index of the neighbour it
    latches each cycle (``-1`` where the PE is a feeder or a chain head).
    """

    schedule: FeedSchedule
    h_src: np.ndarray
    v_src: np.ndarray
    psum_src: np.ndarray
    bottom_exit: np.ndarray  # flat PE indices whose psum leaves downward
    top_exit: np.ndarray  # flat PE indices whose psum leaves upward

    @property
    def rows(self) -> int:
        return self.schedule.rows

    @property
    def cols(self) -> int:
        return self.schedule.cols

    def diagonal_row(self, j: int) -> int | None:
        """Row of the diagonal PE in column ``j`` under Axon (``None`` past the diagonal)."""
        if self.schedule.orchestration is Orchestration.CONVENTIONAL:
            return None
        return j if j < self.rows else None


@lru_cache(maxsize=256)
def build_grid(orchestration, rows: int, cols: int) -> PEGrid:
    sched = FeedSchedule.build(orchestration, rows, cols)
    conventional = sched.orchestration is Orchestration.CONVENTIONAL
    h_src = np.full((rows, cols), -1, dtype=np.intp)
    v_src = np.full((rows, cols), -1, dtype=np.intp)
    p_src = np.full((rows, cols), -1, dtype=np.intp)
    bottom, top = [], []

    def flat(i, j):
        return i * cols + j

    for i in range(rows):
        f = sched.row_feeders[i]
        for j in range(cols):
            if j > f:
                h_src[i, j] = flat(i, j - 1)
            elif j < f:
                h_src[i, j] = flat(i, j + 1)
    for j in range(cols):
        f = sched.col_feeders[j]
        for i in range(rows):
            if i > f:
                v_src[i, j] = flat(i - 1, j)
            elif i < f:
                v_src[i, j] = flat(i + 1, j)

    # Partial-sum chains for the stationary dataflows. The diagonal PE sends its
    # psum down only; the upper segment accumulates upward and leaves at row 0.
    for j in range(cols):
        d = 0 if conventional else (j if j < rows else rows)
        for i in range(rows):
            if i > d:
                p_src[i, j] = flat(i - 1, j)
            elif i < d - 1:
                p_src[i, j] = flat(i + 1, j)
        if d <= rows - 1:
            bottom.append(flat(rows - 1, j))
        if d > 0:
            top.append(flat(0, j))

    for arr in (h_src, v_src, p_src):
        arr.setflags(write=False)
    return PEGrid(sched, h_src.ravel(), v_src.ravel(), p_src.ravel(),
                  np.array(bottom, dtype=np.intp), np.array(top, dtype=np.intp))


def wave_arrivals(orchestration, rows: int, cols: int, t: int) -> dict[tuple[int, int, int], tuple[int, int]]:
    """
    Brute-force token propagation, one latch hop per cycle, written without the
    gather tables above. Returns {(i, j, k): (horizontal arrival, vertical arrival)}.
    """
    sched = FeedSchedule.build(orchestration, rows, cols)
    h = [[BUBBLE] * cols for _ in range(rows)]
    v = [[BUBBLE] * cols for _ in range(rows)]
    seen_h: dict = {}
    seen_v: dict = {}
    horizon = max(sched.row_delays + sched.col_delays) + t + rows + cols
    for cycle in range(horizon):
        nh = [[BUBBLE] * cols for _ in range(rows)]
        nv = [[BUBBLE] * cols for _ in range(rows)]
        for i in range(rows):
            f = sched.row_feeders[i]
            for j in range(cols):
                if j == f:
                    nh[i][j] = sched.row_index(i, cycle, t)
                else:
                    step = -1 if j > f else 1  # copy from the neighbour on the feeder's side
                    nh[i][j] = h[i][j + step]
        for j in range(cols):
            f = sched.col_feeders[j]
            for i in range(rows):
                if i == f:
                    nv[i][j] = sched.col_index(j, cycle, t)
                else:
                    step = -1 if i > f else 1
                    nv[i][j] = v[i + step][j]
        h, v = nh, nv
        for i in range(rows):
            for j in range(cols):
                if h[i][j] != BUBBLE:
                    seen_h.setdefault((i, j, h[i][j]), cycle)
                if v[i][j] != BUBBLE:
                    seen_v.setdefault((i, j, v[i][j]), cycle)
    return {key: (seen_h[key], seen_v[key]) for key in seen_h}
