"""Dynamical partitions: construction, location, refinement, and overlaps.

The depth-n partition of a base point cuts the circle by its first
q_{n-1} + q_n orbit points into q_n long (level n-1) and q_{n-1} short
(level n) intervals. Interval endpoints are stored as orbit indices with
cached coordinates; cover and disjointness are verified as an exact
adjacency bijection on the sorted points, never by length arithmetic.
"""

from bisect import bisect_right
from dataclasses import dataclass

from mpmath import mp, mpf

from .errors import DepthBeyondPrecision, EvenDepthWithoutReversal, InvariantViolation
from .maps import orbit as forward_orbit
from .maps import to_mpf
from .precision import arc_length, comparison_tolerance, frac1

LONG, SHORT = "long", "short"


@dataclass
class PartitionInterval:
    level: str
    index: int
    left_index: int
    right_index: int
    left: mpf
    right: mpf

    @property
    def length(self):
        return arc_length(self.left, self.right)


@dataclass
class Locator:
    x: mpf
    i_n: int
    side: str
    phi_n_of_i: int
    interval: PartitionInterval


def phi_bijection(i, q_prev, q_cur):
    """Index bijection of [0, q_n) pairing long intervals with short-side buckets."""
    if not 0 <= i < q_cur:
        raise ValueError("index out of range")
    return q_cur - q_prev + i if i < q_prev else i - q_prev


class DynamicalPartition:
    def __init__(self, f, table, x0, n, reverse_even=True):
        if n < 1 or n > table.depth:
            raise ValueError("depth must satisfy 1 <= n <= table depth")
        if n % 2 == 0 and not reverse_even:
            raise EvenDepthWithoutReversal(f"depth {n} is even")
        self.f = f
        self.table = table
        self.n = n
        self.base = frac1(to_mpf(x0))
        self.q_prev = table.q[n - 1]
        self.q_cur = table.q[n]
        count = self.q_prev + self.q_cur
        self.orbit = forward_orbit(f, self.base, count)
        self.intervals = self._make_intervals()
        self._index_points()
        self._verify_cover()

    def _make_intervals(self):
        pts, qp, qc, n = self.orbit, self.q_prev, self.q_cur, self.n
        out = []
        if n % 2:
            # level n-1 arcs run forward from f^i(x0); level n arcs end at f^j(x0)
            for i in range(qc):
                out.append(PartitionInterval(LONG, i, i, i + qp, pts[i], pts[i + qp]))
            for j in range(qp):
                out.append(PartitionInterval(SHORT, j, qc + j, j, pts[qc + j], pts[j]))
        else:
            for i in range(qc):
                out.append(PartitionInterval(LONG, i, i + qp, i, pts[i + qp], pts[i]))
            for j in range(qp):
                out.append(PartitionInterval(SHORT, j, j, qc + j, pts[j], pts[qc + j]))
        return out

    def _index_points(self):
        order = sorted(range(len(self.orbit)), key=lambda k: self.orbit[k])
        self._sorted_coords = [self.orbit[k] for k in order]
        self._sorted_idx = order
        self.rank = {k: r for r, k in enumerate(order)}
        gaps = []
        m = len(order)
        for r in range(m):
            gaps.append(arc_length(self._sorted_coords[r], self._sorted_coords[(r + 1) % m]))
        self.min_gap = min(gaps)
        self.max_gap = max(gaps)
        if self.min_gap <= comparison_tolerance() * 16:
            raise DepthBeyondPrecision(
                f"partition endpoints collide at depth {self.n} (gap {mp.nstr(self.min_gap, 5)})"
            )
        self._interval_at_rank = [None] * m
        for itv in self.intervals:
            self._interval_at_rank[self.rank[itv.left_index]] = itv

    def _verify_cover(self):
        m = len(self.orbit)
        for itv in self.intervals:
            if (self.rank[itv.left_index] + 1) % m != self.rank[itv.right_index]:
                raise InvariantViolation(
                    f"interval ({itv.level},{itv.index}) endpoints are not adjacent"
                )
        if any(slot is None for slot in self._interval_at_rank):
            raise InvariantViolation("intervals do not biject with sorted gaps")

    # -- queries --------------------------------------------------------------

    def locate(self, x):
        """Unique containing interval; endpoints resolve to the interval on their right."""
        x = frac1(to_mpf(x))
        r = bisect_right(self._sorted_coords, x) - 1
        if r < 0:
            r = len(self._sorted_coords) - 1
        itv = self._interval_at_rank[r]
        return Locator(x, itv.index, itv.level, phi_bijection(itv.index, self.q_prev, self.q_cur), itv)

    def locate_brute(self, x):
        """Linear-scan oracle for locate (tests only)."""
        x = frac1(to_mpf(x))
        hits = [
            itv
            for itv in self.intervals
            if arc_length(itv.left, x) < itv.length or x == itv.left
        ]
        if len(hits) != 1:
            raise InvariantViolation(f"{len(hits)} intervals claim the point")
        itv = hits[0]
        return Locator(x, itv.index, itv.level, phi_bijection(itv.index, self.q_prev, self.q_cur), itv)

    def max_length(self, level=None):
        lengths = [itv.length for itv in self.intervals if level in (None, itv.level)]
        return max(lengths)

    def interval(self, level, index):
        for itv in self.intervals:
            if itv.level == level and itv.index == index:
                return itv
        raise KeyError((level, index))


def build_partition(f, table, x0, n, reverse_even=True):
    return DynamicalPartition(f, table, x0, n, reverse_even=reverse_even)


def check_refinement(part_n, part_np1):
    """Endpoint-exact refinement of depth-n long intervals inside depth n+1.

    Each long interval (i, i + q_{n-1}) must split as the level-(n+1)
    interval at i followed by a_{n+1} level-n intervals walking back from
    i + q_{n+1} to i + q_{n-1} in steps of q_n.
    """
    if part_np1.n != part_n.n + 1:
        raise ValueError("partitions must be consecutive depths")
    table = part_n.table
    n = part_n.n
    qp, qc, qn1 = part_n.q_prev, part_n.q_cur, table.q[n + 1]
    a_next = table.quotient(n + 1)
    fine = {(itv.left_index, itv.right_index): itv for itv in part_np1.intervals}
    for i in range(qc):
        chain = [(i, i + qn1) if n % 2 else (i + qn1, i)]
        for s in range(a_next - 1, -1, -1):
            lo, hi = i + qp + s * qc, i + qp + (s + 1) * qc
            chain.append((hi, lo) if n % 2 else (lo, hi))
        # walk the chain: consecutive pieces share endpoints and all exist
        for piece in chain:
            if piece not in fine:
                raise InvariantViolation(f"refinement piece {piece} missing at depth {n + 1}")
        start = chain[0][0] if n % 2 else chain[0][1]
        end = chain[-1][1] if n % 2 else chain[-1][0]
        if n % 2:
            if start != i or end != i + qp:
                raise InvariantViolation("refinement chain endpoints wrong")
            for a, b in zip(chain, chain[1:]):
                if a[1] != b[0]:
                    raise InvariantViolation("refinement chain broken")
        else:
            if start != i or end != i + qp:
                raise InvariantViolation("refinement chain endpoints wrong")
            for a, b in zip(chain, chain[1:]):
                if a[0] != b[1]:
                    raise InvariantViolation("refinement chain broken")
    return True


def overlap_level_mixed(k, n, table):
    """Does the base long interval meet the k-th level-n image (index rule)?

    True exactly when k = q_{n-1} + q_{n+1} or k = q_{n-1} + j q_n with
    0 <= j <= a_{n+1}.
    """
    qp, qc, qn1 = table.q[n - 1], table.q[n], table.q[n + 1]
    if not 0 <= k < qn1 + qc:
        raise ValueError("k out of range")
    a_next = table.quotient(n + 1)
    if k == qp + qn1:
        return True
    d = k - qp
    return d >= 0 and d % qc == 0 and d // qc <= a_next


def overlap_reverse(k, n, table):
    """Does the k-th long image meet the base level-n interval (index rule)?

    True exactly when k = q_n + q_{n+1} or k = j q_n with 1 <= j <= a_{n+1}+1.
    """
    qc, qn1 = table.q[n], table.q[n + 1]
    a_next = table.quotient(n + 1)
    if not 0 <= k < (a_next + 2) * qc:
        raise ValueError("k out of range")
    if k == qc + qn1:
        return True
    return k % qc == 0 and 1 <= k // qc <= a_next + 1


def arcs_overlap_interior(a_left, a_right, b_left, b_right, tol=None):
    """Whether two positively oriented arcs share interior points."""
    if tol is None:
        tol = comparison_tolerance() * 16
    la = arc_length(a_left, a_right)
    lb = arc_length(b_left, b_right)
    # offset of b's left inside a, and of a's left inside b
    off_ab = arc_length(a_left, b_left)
    off_ba = arc_length(b_left, a_left)
    return off_ab < la - tol or off_ba < lb - tol


def decay_profile(f, table, x0, n_values):
    """Max interval length per depth plus the fitted log-slope.

    Returns (records, fitted_slope, log_lambda) where records are
    (n, max_length) pairs and lambda = (1 + e^-V)^(-1/2).
    """
    records = []
    for n in n_values:
        part = build_partition(f, table, x0, n)
        records.append((n, part.max_length()))
    xs = [float(n) for n, _ in records]
    ys = [float(mp.log(m)) for _, m in records]
    count = len(xs)
    mean_x = sum(xs) / count
    mean_y = sum(ys) / count
    sxx = sum((x - mean_x) ** 2 for x in xs)
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    slope = sxy / sxx
    v = f.log_df_variation()
    lam = (1 + mp.e ** (-v)) ** mpf("-0.5")
    return records, slope, float(mp.log(lam))
