"""Closed-interval arithmetic for set-valued output estimates.

Only the operations the estimator needs: exact products with an uncertain
coefficient interval and Minkowski sums. Widths are additive under the sum,
which is what makes the scaling recursion exact.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] on the real line."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (self.lo <= self.hi):
            raise ValueError(f"malformed interval: lo={self.lo} > hi={self.hi}")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= x <= self.hi + slack

    def contains_zero_strictly(self) -> bool:
        return self.lo < 0.0 < self.hi

    def scaled(self, c: float) -> "Interval":
        """Image under multiplication by the scalar c."""
        a, b = c * self.lo, c * self.hi
        return Interval(a, b) if a <= b else Interval(b, a)

    def shifted(self, c: float) -> "Interval":
        return Interval(self.lo + c, self.hi + c)


def width(iv: Interval) -> float:
    return iv.width


def interval_product(a: Interval, y: Interval) -> Interval:
    """Exact set product a*y = {u*v : u in a, v in y}.

    The hull of the four endpoint products; exact because both sets are
    intervals.
    """
    ps = (a.lo * y.lo, a.lo * y.hi, a.hi * y.lo, a.hi * y.hi)
    return Interval(min(ps), max(ps))


def minkowski_sum(terms: list[Interval] | tuple[Interval, ...]) -> Interval:
    """Elementwise sum of a nonempty collection of intervals."""
    if not terms:
        raise ValueError("minkowski_sum of an empty collection")
    lo = 0.0
    hi = 0.0
    for t in terms:
        lo += t.lo
        hi += t.hi
    return Interval(lo, hi)
