"""Candlestick geometry, trend detection and the eight reversal-pattern rules.

A window is a ``(10, 4)`` float array with columns open, high, low, close.
Bars ``0..6`` form the trend segment and bars ``7..9`` the pattern.  All
size judgements are ratios (bodies against the window's mean body, trend
slope against mean bar range) so labels do not depend on the price level.
"""

import enum
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .errors import AmbiguousMatch, ConfigError, DegenerateWindow

WINDOW_LEN = 10
TREND_LEN = 7
OPEN, HIGH, LOW, CLOSE = range(4)


class PatternLabel(enum.IntEnum):
    MORNING_STAR = 1
    EVENING_STAR = 2
    BULLISH_ENGULFING = 3
    BEARISH_ENGULFING = 4
    SHOOTING_STAR = 5
    INVERTED_HAMMER = 6
    BULLISH_HARAMI = 7
    BEARISH_HARAMI = 8


class Trend(enum.Enum):
    UP = "up"
    DOWN = "down"
    FLAT = "flat"


class Color(enum.Enum):
    WHITE = "white"
    BLACK = "black"
    DOJI = "doji"


BULLISH = (
    PatternLabel.MORNING_STAR,
    PatternLabel.BULLISH_ENGULFING,
    PatternLabel.INVERTED_HAMMER,
    PatternLabel.BULLISH_HARAMI,
)


def required_trend(label: PatternLabel) -> Trend:
    """Bullish reversals follow a downtrend, bearish ones an uptrend."""
    return Trend.DOWN if PatternLabel(label) in BULLISH else Trend.UP


class OhlcBar(NamedTuple):
    open: float
    high: float
    low: float
    close: float

    def check(self):
        """Return a reason string if the bar is invalid, else None."""
        vals = (self.open, self.high, self.low, self.close)
        if not all(np.isfinite(v) for v in vals):
            return "non-finite price"
        if min(vals) <= 0:
            return "prices must be positive"
        if self.high < max(self.open, self.close):
            return "high below max(open, close)"
        if self.low > min(self.open, self.close):
            return "low above min(open, close)"
        return None


@dataclass(frozen=True)
class BarGeometry:
    body: float
    color: Color
    upper_shadow: float
    lower_shadow: float


@dataclass(frozen=True)
class RuleParams:
    long_body_factor: float = 1.2
    short_body_factor: float = 0.6
    long_shadow_factor: float = 1.0
    trend_slope_threshold: float = 0.1
    inverted_hammer_upper_shadow: bool = False

    def __post_init__(self):
        if not self.long_body_factor > self.short_body_factor > 0:
            raise ConfigError("rules: need long_body_factor > short_body_factor > 0")
        if self.long_shadow_factor <= 0:
            raise ConfigError("rules: long_shadow_factor must be positive")
        if self.trend_slope_threshold <= 0:
            raise ConfigError("rules: trend_slope_threshold must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def geometry(bar) -> BarGeometry:
    o, h, l, c = (float(v) for v in bar)
    top, bottom = max(o, c), min(o, c)
    if c > o:
        color = Color.WHITE
    elif c < o:
        color = Color.BLACK
    else:
        color = Color.DOJI
    return BarGeometry(abs(c - o), color, h - top, bottom - l)


def is_valid_window(window) -> bool:
    w = np.asarray(window, dtype=np.float64)
    if w.shape != (WINDOW_LEN, 4) or not np.all(np.isfinite(w)) or np.any(w <= 0):
        return False
    top = np.maximum(w[:, OPEN], w[:, CLOSE])
    bottom = np.minimum(w[:, OPEN], w[:, CLOSE])
    return bool(np.all(w[:, HIGH] >= top) and np.all(w[:, LOW] <= bottom))


def trend_ratio(bars) -> float:
    """Least-squares slope of closes per bar divided by the mean bar range."""
    b = np.asarray(bars, dtype=np.float64)
    mean_range = float(np.mean(b[:, HIGH] - b[:, LOW]))
    if mean_range <= 0:
        raise DegenerateWindow("trend segment has zero mean bar range")
    t = np.arange(len(b), dtype=np.float64)
    t -= t.mean()
    y = b[:, CLOSE]
    slope = float(np.dot(t, y - y.mean()) / np.dot(t, t))
    return slope / mean_range


def detect_trend(bars, params: RuleParams = RuleParams()) -> Trend:
    b = np.asarray(bars, dtype=np.float64)
    if b.shape != (TREND_LEN, 4):
        raise ValueError(f"trend segment must have shape ({TREND_LEN}, 4), got {b.shape}")
    ratio = trend_ratio(b)
    if ratio > params.trend_slope_threshold:
        return Trend.UP
    if ratio < -params.trend_slope_threshold:
        return Trend.DOWN
    return Trend.FLAT


class _Bar:
    """Pattern-bar view with size judgements relative to the window."""

    def __init__(self, row, mean_body, params):
        o, h, l, c = (float(v) for v in row)
        g = geometry((o, h, l, c))
        self.body_lo, self.body_hi = min(o, c), max(o, c)
        self.color = g.color
        self.white = g.color is Color.WHITE
        self.black = g.color is Color.BLACK
        self.long = g.body >= params.long_body_factor * mean_body
        self.short = g.body <= params.short_body_factor * mean_body
        ref = params.long_shadow_factor * max(g.body, 0.1 * mean_body)
        self.long_upper = g.upper_shadow >= ref
        self.long_lower = g.lower_shadow >= ref

    def contains(self, other) -> bool:
        return self.body_lo < other.body_lo and self.body_hi > other.body_hi


def _predicates(a, b, c, params):
    hammer_shadow = b.long_upper if params.inverted_hammer_upper_shadow else b.long_lower
    no_long_shadows = not (b.long_upper or b.long_lower)
    bullish = {
        PatternLabel.MORNING_STAR: (
            a.black and a.long and b.short and b.long_lower and c.white and c.long
        ),
        PatternLabel.BULLISH_ENGULFING: (
            a.black and a.short and b.white and b.long and b.contains(a) and c.white
        ),
        PatternLabel.INVERTED_HAMMER: (
            a.black and a.long and b.short and hammer_shadow and c.white and not c.long
        ),
        PatternLabel.BULLISH_HARAMI: (
            a.black and a.long and b.white and b.short and a.contains(b)
            and no_long_shadows and c.white
        ),
    }
    bearish = {
        PatternLabel.EVENING_STAR: (
            a.white and a.long and b.short and not b.long_upper and not a.contains(b)
            and c.black
        ),
        PatternLabel.BEARISH_ENGULFING: (
            a.white and a.short and b.black and b.long and b.contains(a) and c.black
        ),
        PatternLabel.SHOOTING_STAR: (
            a.white and a.long and b.short and b.long_upper and c.black
        ),
        PatternLabel.BEARISH_HARAMI: (
            a.white and a.long and b.black and b.short and a.contains(b)
            and no_long_shadows and c.black
        ),
    }
    return bullish, bearish


def matching_labels(window, params: RuleParams = RuleParams()) -> list[PatternLabel]:
    """Every pattern whose rule the window satisfies (normally zero or one)."""
    w = np.asarray(window, dtype=np.float64)
    if w.shape != (WINDOW_LEN, 4):
        raise ValueError(f"window must have shape ({WINDOW_LEN}, 4), got {w.shape}")
    try:
        trend = detect_trend(w[:TREND_LEN], params)
    except DegenerateWindow:
        return []
    if trend is Trend.FLAT:
        return []
    mean_body = float(np.mean(np.abs(w[:, CLOSE] - w[:, OPEN])))
    a, b, c = (_Bar(w[i], mean_body, params) for i in range(TREND_LEN, WINDOW_LEN))
    bullish, bearish = _predicates(a, b, c, params)
    table = bullish if trend is Trend.DOWN else bearish
    return [label for label, ok in table.items() if ok]


def match_pattern(window, params: RuleParams = RuleParams()):
    """The unique pattern label of ``window``, or None when no rule matches.

    Raises AmbiguousMatch if more than one rule fires.
    """
    hits = matching_labels(window, params)
    if len(hits) > 1:
        raise AmbiguousMatch(hits)
    return hits[0] if hits else None


def rule_check(window, expected, params: RuleParams = RuleParams()) -> bool:
    try:
        return match_pattern(window, params) == PatternLabel(expected)
    except AmbiguousMatch:
        return False
