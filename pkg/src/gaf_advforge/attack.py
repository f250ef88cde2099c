"""Local-search attack sampling on GAF diagonals.

Each episode multiplies every diagonal entry of the (current) GAF tensor by
a factor drawn uniformly from a per-position interval, clamps the products
into [-1, 1], decodes the diagonal back to a normalized series and
re-encodes it, so off-diagonal entries stay consistent.  The working tensor
is restored from the original every ``reset_period`` episodes.

Two uses share the same loop:

* :func:`sample_adversarial` / :func:`sample_pool` keep every re-encoded
  tensor the model still classifies correctly (a failed attack) as a
  training example, at every depth 1..reset_period;
* :func:`attack_eval` counts an item as broken as soon as one episode flips
  the prediction.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng as rng_mod
from .candlestick import PatternLabel, RuleParams, is_valid_window, rule_check
from .dataset import ADVERSARIAL, Dataset, adversarial_window_id
from .errors import ConfigError
from .gaf import decode_diagonal, denormalize, encode_stack

SIDE = 10


@dataclass(frozen=True)
class AttackConfig:
    episodes: int = 10
    reset_period: int = 3
    scale_low: float = 0.99
    scale_high: float = 1.01
    # optional per-position (low, high) pairs overriding scale_low/scale_high
    schedule: tuple | None = None
    seed: int = 0
    shared_channels: bool = False
    channels: tuple = (0, 1, 2, 3)
    require_rule_consistent: bool = False

    def __post_init__(self):
        if self.episodes < 1 or self.reset_period < 1:
            raise ConfigError("attack: episodes and reset_period must be >= 1")
        if not 0 < self.scale_low <= 1 <= self.scale_high:
            raise ConfigError("attack: need 0 < scale_low <= 1 <= scale_high")
        if self.schedule is not None:
            sched = tuple(tuple(float(v) for v in pair) for pair in self.schedule)
            if len(sched) != SIDE or any(len(pair) != 2 for pair in sched):
                raise ConfigError("attack: schedule needs 10 (low, high) pairs")
            if any(not 0 < lo <= hi for lo, hi in sched):
                raise ConfigError("attack: schedule pairs need 0 < low <= high")
            object.__setattr__(self, "schedule", sched)
        chans = tuple(sorted(set(int(c) for c in self.channels)))
        if not chans or chans[0] < 0 or chans[-1] > 3:
            raise ConfigError("attack: channels must be a non-empty subset of 0..3")
        object.__setattr__(self, "channels", chans)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-position (low, high) arrays of length 10."""
        if self.schedule is None:
            return np.full(SIDE, self.scale_low), np.full(SIDE, self.scale_high)
        arr = np.array(self.schedule)
        return arr[:, 0].copy(), arr[:, 1].copy()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schedule"] = None if self.schedule is None else [list(p) for p in self.schedule]
        d["channels"] = list(self.channels)
        return d


def region_schedule(trend_scale: float, pattern_scale: float) -> tuple:
    """Schedule with a wider interval on the 7 trend bars than on the last 3."""
    trend = (1.0 - trend_scale, 1.0 + trend_scale)
    pattern = (1.0 - pattern_scale, 1.0 + pattern_scale)
    return (trend,) * 7 + (pattern,) * 3


def recency_schedule(oldest: float, newest: float) -> tuple:
    """Half-widths interpolated linearly from the oldest to the newest bar."""
    widths = np.linspace(oldest, newest, SIDE)
    return tuple((1.0 - w, 1.0 + w) for w in widths)


@dataclass
class PerturbationRecord:
    tensor: np.ndarray
    source_window_id: int
    label: PatternLabel
    episode_index: int
    perturb_depth: int
    rule_consistent: bool


@dataclass
class AttackOutcome:
    success: bool
    episodes_used: int


@dataclass
class AttackTable:
    """Per-label attack success counts; ``average`` is the unweighted mean of
    the rates over labels that have at least one item."""

    success: dict = field(default_factory=dict)
    total: dict = field(default_factory=dict)
    outcomes: list = field(default_factory=list)

    def rate(self, label) -> float:
        n = self.total.get(int(label), 0)
        return self.success.get(int(label), 0) / n if n else 0.0

    @property
    def average(self) -> float:
        present = [lab for lab in PatternLabel if self.total.get(int(lab), 0)]
        if not present:
            return 0.0
        return float(np.mean([self.rate(lab) for lab in present]))

    def to_dict(self) -> dict:
        return {
            "per_label": [
                {
                    "label": int(lab),
                    "success": int(self.success.get(int(lab), 0)),
                    "total": int(self.total.get(int(lab), 0)),
                    "rate": self.rate(lab),
                }
                for lab in PatternLabel
            ],
            "average": self.average,
        }


def _draws(cfg: AttackConfig, tag: int, item_keys) -> np.ndarray:
    """``(N, R, 4, 10)`` scale factors, one independent stream per item."""
    low, high = cfg.bounds()
    width = high - low
    mask = np.zeros((4, 1))
    mask[list(cfg.channels)] = 1.0
    out = np.empty((len(item_keys), cfg.episodes, 4, SIDE))
    n_ch = 1 if cfg.shared_channels else 4
    for i, key in enumerate(item_keys):
        gen = rng_mod.generator(cfg.seed, tag, int(key))
        u = gen.random((cfg.episodes, n_ch, SIDE))
        out[i] = low + width * u
    # untouched channels keep factor exactly 1
    return out * mask + (1.0 - mask)


def reencode(tensors, factors):
    """Scale diagonals, clamp, decode and re-encode.

    ``tensors`` is ``(..., 4, 10, 10)``, ``factors`` ``(..., 4, 10)``.
    Returns the new tensors and the pre-clamp diagonals.
    """
    diag = np.diagonal(tensors, axis1=-2, axis2=-1) * factors
    clamped = np.clip(diag, -1.0, 1.0)
    series = np.sqrt((clamped + 1.0) / 2.0)
    return encode_stack(series), diag


def perturb_diagonals(tensor, cfg: AttackConfig, rng: np.random.Generator) -> np.ndarray:
    """One perturbation step on a single ``(4, 10, 10)`` tensor."""
    low, high = cfg.bounds()
    n_ch = 1 if cfg.shared_channels else 4
    factors = np.broadcast_to(low + (high - low) * rng.random((n_ch, SIDE)), (4, SIDE)).copy()
    untouched = [c for c in range(4) if c not in cfg.channels]
    factors[untouched] = 1.0
    return reencode(np.asarray(tensor, dtype=np.float64), factors)[0]


def _local_search(model, originals, labels, factors, cfg, on_episode=None, stop_on_success=False):
    """Shared episode loop over a batch.

    Yields ``(episode, depth, tensors, correct, active)`` after every episode,
    where ``active`` marks items still being attacked.
    """
    n = len(originals)
    current = originals.copy()
    active = np.ones(n, dtype=bool)
    depth = 0
    for ep in range(cfg.episodes):
        if depth == cfg.reset_period:
            current = originals.copy()
            depth = 0
        start = current
        current, pre_clamp = reencode(current, factors[:, ep])
        depth += 1
        correct = np.zeros(n, dtype=bool)
        if active.any():
            correct[active] = model.predict_batch(current[active]) == labels[active]
        if on_episode is not None:
            on_episode(
                {
                    "episode": ep + 1,
                    "depth": depth,
                    "start": start,
                    "pre_clamp": pre_clamp,
                    "tensors": current,
                    "correct": correct,
                }
            )
        yield ep + 1, depth, current, correct, active.copy()
        if stop_on_success:
            active &= correct
            if not active.any():
                return


def _rule_consistency(tensors, scales, labels, rule_params):
    """Decode each tensor back to prices and check it against the rules."""
    out = np.zeros(len(tensors), dtype=bool)
    if scales is None:
        return out
    series = decode_diagonal(tensors)
    for i in range(len(tensors)):
        window = denormalize(series[i], scales[i])
        out[i] = is_valid_window(window) and rule_check(window, labels[i], rule_params)
    return out


def sample_adversarial(model, tensor, label, cfg: AttackConfig = AttackConfig(),
                       rule_params: RuleParams = RuleParams(), *, source_window_id=0,
                       scales=None, on_episode=None) -> list[PerturbationRecord]:
    """Run the episode loop on one item and keep every failed attack."""
    label = PatternLabel(label)
    originals = np.asarray(tensor, dtype=np.float64)[None]
    labels = np.array([int(label)], dtype=np.uint8)
    factors = _draws(cfg, rng_mod.SAMPLE, [source_window_id])
    sc = None if scales is None else np.asarray(scales, dtype=np.float64)[None]
    records = []
    for episode, depth, current, correct, _ in _local_search(
        model, originals, labels, factors, cfg, on_episode
    ):
        if not correct[0]:
            continue
        consistent = bool(_rule_consistency(current, sc, labels, rule_params)[0])
        if cfg.require_rule_consistent and not consistent:
            continue
        records.append(
            PerturbationRecord(current[0].copy(), int(source_window_id), label, episode, depth,
                               consistent)
        )
    return records


def sample_pool(model, dataset: Dataset, cfg: AttackConfig = AttackConfig(),
                rule_params: RuleParams = RuleParams(), chunk: int = 512) -> Dataset:
    """Failed attacks for every item of ``dataset`` as an adversarial Dataset.

    Per-record bookkeeping lives in ``meta``: ``source_id``, ``episode``,
    ``depth`` and ``rule_consistent``.  Items appear grouped by source in
    dataset order, episodes ascending.
    """
    parts = []
    for lo in range(0, len(dataset), chunk):
        sub = dataset.subset(np.arange(lo, min(lo + chunk, len(dataset))))
        factors = _draws(cfg, rng_mod.SAMPLE, sub.window_ids)
        found = []
        for episode, depth, current, correct, _ in _local_search(
            model, sub.tensors, sub.labels, factors, cfg
        ):
            idx = np.flatnonzero(correct)
            if len(idx) == 0:
                continue
            consistent = _rule_consistency(
                current[idx], None if sub.scales is None else sub.scales[idx],
                sub.labels[idx], rule_params,
            )
            if cfg.require_rule_consistent:
                idx, consistent = idx[consistent], consistent[consistent]
            found.append((idx, episode, depth, current[idx].copy(), consistent))
        if not found:
            continue
        idx = np.concatenate([f[0] for f in found])
        episode = np.concatenate([np.full(len(f[0]), f[1]) for f in found])
        order = np.lexsort((episode, idx))
        tensors = np.concatenate([f[3] for f in found])[order]
        consistent = np.concatenate([f[4] for f in found])[order]
        depth = np.concatenate([np.full(len(f[0]), f[2]) for f in found])[order]
        idx, episode = idx[order], episode[order]
        src = sub.window_ids[idx]
        ids = [adversarial_window_id(s, e) for s, e in zip(src, episode)]
        parts.append(
            Dataset(
                tensors, sub.labels[idx], ids, provenance=ADVERSARIAL, seed=cfg.seed,
                scales=None if sub.scales is None else sub.scales[idx],
                meta={
                    "source_id": src.astype(np.uint64),
                    "episode": episode.astype(np.int64),
                    "depth": depth.astype(np.int64),
                    "rule_consistent": consistent.astype(bool),
                },
            )
        )
    if not parts:
        return Dataset(np.empty((0, 4, SIDE, SIDE)), [], [], provenance=ADVERSARIAL,
                       seed=cfg.seed, meta={k: np.empty(0) for k in
                                            ("source_id", "episode", "depth", "rule_consistent")})
    return Dataset.concat(parts, ADVERSARIAL, seed=cfg.seed)


def attack_eval(model, dataset: Dataset, cfg: AttackConfig = AttackConfig(),
                chunk: int = 512) -> AttackTable:
    """Attack every item; success means some episode changed the prediction."""
    table = AttackTable()
    outcomes = [None] * len(dataset)
    for lo in range(0, len(dataset), chunk):
        sub = dataset.subset(np.arange(lo, min(lo + chunk, len(dataset))))
        factors = _draws(cfg, rng_mod.ATTACK, sub.window_ids)
        used = np.full(len(sub), cfg.episodes)
        broken = np.zeros(len(sub), dtype=bool)
        for episode, _, _, correct, active in _local_search(
            model, sub.tensors, sub.labels, factors, cfg, stop_on_success=True
        ):
            newly = active & ~correct
            broken |= newly
            used[newly] = episode
        for j in range(len(sub)):
            outcomes[lo + j] = AttackOutcome(bool(broken[j]), int(used[j]))
    for lab in PatternLabel:
        sel = dataset.labels == lab
        table.total[int(lab)] = int(sel.sum())
        table.success[int(lab)] = int(sum(o.success for o, s in zip(outcomes, sel) if s))
    table.outcomes = outcomes
    return table
