"""Prediction bank: per-case mined boxes with binary hit histories.

Each registered case stores ground-truth entries (fixed) and mined entries.
On every visit the bank filters incoming detections by score, suppresses the
ones that overlap the case's annotations, matches the survivors one-to-one to
existing mined entries by IoU, and extends every mined entry's hit history by
exactly one bit (1 = re-detected this visit, 0 = missed). Hit counts are the
reliability measure used to select pseudo-labels for retraining.

Update semantics, in order:

1. drop predictions scoring below the record threshold;
2. drop predictions overlapping any annotation at IoU >= ``gt_iou``;
3. greedily match survivors to existing mined entries, one-to-one, taking
   pairs in descending IoU order among pairs with IoU >= ``match_iou``
   (ties: earlier entry, then earlier prediction);
4. matched entries append 1 and fold the matched box into their running mean;
5. unmatched mined entries append 0;
6. remaining unmatched survivors become new entries with history ``[1]``;
7. mined entries whose boxes now overlap at IoU >= ``match_iou`` are merged
   (earliest entry absorbs the later one: histories are OR-ed bitwise over
   the rounds both cover, boxes combine as an observation-count-weighted
   mean), so no two mined entries ever overlap at the match threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Box2D, ScoredBox, boxes_to_array, iou, pairwise_iou

__all__ = [
    "GROUND_TRUTH",
    "MINED",
    "BankEntry",
    "UpdateReport",
    "PredictionBank",
    "SnapshotError",
    "SNAPSHOT_HEADER",
]

GROUND_TRUTH = "ground_truth"
MINED = "mined"

SNAPSHOT_HEADER = "explorabank-snapshot v1"


class SnapshotError(ValueError):
    """Raised when a bank snapshot cannot be parsed; carries a byte offset."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


@dataclass
class BankEntry:
    """One recorded box: its running-mean location and per-visit hit bits.

    ``created_round`` is the 1-based visit index at which a mined entry was
    first recorded; ground-truth entries use 0 and keep an empty history.
    """

    box: Box2D
    origin: str
    hit_history: list[int] = field(default_factory=list)
    created_round: int = 0

    @property
    def match_count(self) -> int:
        return sum(self.hit_history)

    def copy(self) -> "BankEntry":
        return BankEntry(self.box, self.origin, list(self.hit_history), self.created_round)


@dataclass(frozen=True)
class UpdateReport:
    """Counts from one visit: matched entries, new entries, missed entries."""

    matched: int
    new: int
    missed: int


@dataclass
class _CaseState:
    entries: list[BankEntry]
    visits: int = 0


class PredictionBank:
    """Per-case record of when and how often boxes were re-detected.

    Not thread-safe for concurrent updates to the same case; reads of a
    quiescent bank are safe from any number of threads.
    """

    def __init__(
        self,
        record_threshold: float = 0.85,
        match_iou: float = 0.7,
        gt_iou: float = 0.7,
    ):
        if not 0.0 <= record_threshold <= 1.0:
            raise ValueError(f"record_threshold must be in [0, 1], got {record_threshold!r}")
        if not 0.0 < match_iou <= 1.0:
            raise ValueError(f"match_iou must be in (0, 1], got {match_iou!r}")
        if not 0.0 < gt_iou <= 1.0:
            raise ValueError(f"gt_iou must be in (0, 1], got {gt_iou!r}")
        self.record_threshold = record_threshold
        self.match_iou = match_iou
        self.gt_iou = gt_iou
        self._cases: dict[str, _CaseState] = {}

    # -- registration -------------------------------------------------------

    def add_case(self, case_id: str, annotations: list[Box2D]) -> None:
        """Register a case with its (possibly empty) ground-truth boxes."""
        if case_id in self._cases:
            raise ValueError(f"case {case_id!r} already registered")
        if any(ch.isspace() for ch in case_id) or not case_id:
            raise ValueError(f"case_id must be non-empty without whitespace, got {case_id!r}")
        entries = [BankEntry(box, GROUND_TRUTH) for box in annotations]
        self._cases[case_id] = _CaseState(entries=entries)

    def case_ids(self) -> list[str]:
        return list(self._cases)

    def copy(self) -> "PredictionBank":
        """Deep copy of the full bank state."""
        out = PredictionBank(self.record_threshold, self.match_iou, self.gt_iou)
        for case_id, case in self._cases.items():
            out._cases[case_id] = _CaseState(
                entries=[e.copy() for e in case.entries], visits=case.visits
            )
        return out

    def visits(self, case_id: str) -> int:
        return self._case(case_id).visits

    def entries(self, case_id: str) -> list[BankEntry]:
        """Entries of a case (ground truth first, then mined in creation order)."""
        return [e.copy() for e in self._case(case_id).entries]

    def _case(self, case_id: str) -> _CaseState:
        try:
            return self._cases[case_id]
        except KeyError:
            raise KeyError(f"unknown case {case_id!r}") from None

    # -- update -------------------------------------------------------------

    def update(
        self,
        case_id: str,
        predictions: list[ScoredBox],
        annotations: list[Box2D],
    ) -> UpdateReport:
        """Record one visit of a case; see the module docstring for the rule."""
        case = self._case(case_id)
        survivors = [p for p in predictions if p.score >= self.record_threshold]
        if survivors and annotations:
            ious = pairwise_iou(
                boxes_to_array(p.box for p in survivors), boxes_to_array(annotations)
            )
            survivors = [
                p for p, m in zip(survivors, ious.max(axis=1)) if m < self.gt_iou
            ]

        mined = [e for e in case.entries if e.origin == MINED]

        # Greedy one-to-one matching by descending IoU.
        pairs = []
        for ei, entry in enumerate(mined):
            for si, sb in enumerate(survivors):
                overlap = iou(entry.box, sb.box)
                if overlap >= self.match_iou:
                    pairs.append((-overlap, ei, si))
        pairs.sort()
        taken_entries: set[int] = set()
        taken_survivors: set[int] = set()
        assignment: dict[int, int] = {}
        for _, ei, si in pairs:
            if ei in taken_entries or si in taken_survivors:
                continue
            taken_entries.add(ei)
            taken_survivors.add(si)
            assignment[ei] = si

        matched = 0
        missed = 0
        for ei, entry in enumerate(mined):
            if ei in assignment:
                observed = survivors[assignment[ei]].box
                count = entry.match_count + 1
                entry.box = _running_mean(entry.box, observed, count)
                entry.hit_history.append(1)
                matched += 1
            else:
                entry.hit_history.append(0)
                missed += 1

        new_round = case.visits + 1
        new = 0
        for si, sb in enumerate(survivors):
            if si in taken_survivors:
                continue
            case.entries.append(BankEntry(sb.box, MINED, [1], new_round))
            new += 1

        _merge_overlapping(case, self.match_iou)
        case.visits = new_round
        return UpdateReport(matched=matched, new=new, missed=missed)

    # -- queries ------------------------------------------------------------

    def select(self, min_hits: int) -> dict[str, list[Box2D]]:
        """Mined boxes re-detected at least ``min_hits`` times, per case.

        Ground-truth entries are excluded; they are supplied separately at
        retraining. Cases with no qualifying entry are omitted.
        """
        if min_hits < 1:
            raise ValueError(f"min_hits must be >= 1, got {min_hits!r}")
        out: dict[str, list[Box2D]] = {}
        for case_id, case in self._cases.items():
            boxes = [
                e.box
                for e in case.entries
                if e.origin == MINED and e.match_count >= min_hits
            ]
            if boxes:
                out[case_id] = boxes
        return out

    def mined_entries(self) -> dict[str, list[BankEntry]]:
        """All mined entries per case (copies), for inspection and statistics."""
        out: dict[str, list[BankEntry]] = {}
        for case_id, case in self._cases.items():
            items = [e.copy() for e in case.entries if e.origin == MINED]
            if items:
                out[case_id] = items
        return out

    def latest_hit_count(self) -> int:
        """Number of entries whose most recent hit bit is 1, over all cases."""
        total = 0
        for case in self._cases.values():
            for entry in case.entries:
                if entry.hit_history and entry.hit_history[-1] == 1:
                    total += 1
        return total

    def mined_total(self) -> int:
        """Current number of mined entries across all cases."""
        return sum(
            1 for case in self._cases.values() for e in case.entries if e.origin == MINED
        )

    # -- snapshot format ----------------------------------------------------

    def to_bytes(self) -> bytes:
        """Serialize to the versioned line-oriented snapshot format."""
        lines = [SNAPSHOT_HEADER]
        lines.append(
            "thresholds record={!r} match_iou={!r} gt_iou={!r}".format(
                self.record_threshold, self.match_iou, self.gt_iou
            )
        )
        for case_id, case in self._cases.items():
            lines.append(f"case {case_id} visits={case.visits}")
            for e in case.entries:
                bits = "".join(str(b) for b in e.hit_history) if e.hit_history else "-"
                lines.append(
                    "entry {} {} {!r} {!r} {!r} {!r} created={} hits={}".format(
                        case_id,
                        e.origin,
                        e.box.x_min,
                        e.box.y_min,
                        e.box.x_max,
                        e.box.y_max,
                        e.created_round,
                        bits,
                    )
                )
        return ("\n".join(lines) + "\n").encode("utf-8")

    @classmethod
    def from_bytes(cls, data: bytes) -> "PredictionBank":
        """Parse a snapshot; raises SnapshotError (with byte offset) when malformed."""
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SnapshotError(f"snapshot is not valid UTF-8: {exc}", exc.start) from None

        offset = 0
        lines: list[tuple[int, str]] = []
        for raw in text.split("\n"):
            lines.append((offset, raw))
            offset += len(raw.encode("utf-8")) + 1
        # A trailing newline produces one empty tail element; drop it.
        if lines and lines[-1][1] == "":
            lines.pop()

        if not lines or lines[0][1] != SNAPSHOT_HEADER:
            raise SnapshotError(
                f"missing or unsupported header (expected {SNAPSHOT_HEADER!r})", 0
            )
        if len(lines) < 2 or not lines[1][1].startswith("thresholds "):
            raise SnapshotError("missing thresholds line", lines[1][0] if len(lines) > 1 else offset)

        thr_offset, thr_line = lines[1]
        thresholds = _parse_kv(thr_line.split()[1:], ("record", "match_iou", "gt_iou"), thr_offset)
        bank = cls(
            record_threshold=thresholds["record"],
            match_iou=thresholds["match_iou"],
            gt_iou=thresholds["gt_iou"],
        )

        current: _CaseState | None = None
        current_id = ""
        for line_offset, line in lines[2:]:
            if not line.strip():
                raise SnapshotError("blank line inside snapshot", line_offset)
            tokens = line.split()
            if tokens[0] == "case":
                if len(tokens) != 3 or not tokens[2].startswith("visits="):
                    raise SnapshotError("malformed case line", line_offset)
                case_id = tokens[1]
                if case_id in bank._cases:
                    raise SnapshotError(f"duplicate case {case_id!r}", line_offset)
                visits = _parse_int(tokens[2][len("visits="):], "visits", line_offset)
                current = _CaseState(entries=[], visits=visits)
                current_id = case_id
                bank._cases[case_id] = current
            elif tokens[0] == "entry":
                if current is None:
                    raise SnapshotError("entry before any case line", line_offset)
                entry = _parse_entry(tokens, current_id, current.visits, line_offset)
                current.entries.append(entry)
            else:
                raise SnapshotError(f"unrecognized record {tokens[0]!r}", line_offset)
        return bank

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PredictionBank):
            return NotImplemented
        if (
            self.record_threshold != other.record_threshold
            or self.match_iou != other.match_iou
            or self.gt_iou != other.gt_iou
        ):
            return False
        if list(self._cases) != list(other._cases):
            return False
        for case_id, case in self._cases.items():
            rhs = other._cases[case_id]
            if case.visits != rhs.visits or len(case.entries) != len(rhs.entries):
                return False
            for a, b in zip(case.entries, rhs.entries):
                if (
                    a.origin != b.origin
                    or a.hit_history != b.hit_history
                    or a.created_round != b.created_round
                    or a.box != b.box
                ):
                    return False
        return True


def _running_mean(mean: Box2D, observed: Box2D, count: int) -> Box2D:
    # Incremental form keeps the mean exactly fixed under identical inputs.
    inv = 1.0 / count
    return Box2D(
        mean.x_min + (observed.x_min - mean.x_min) * inv,
        mean.y_min + (observed.y_min - mean.y_min) * inv,
        mean.x_max + (observed.x_max - mean.x_max) * inv,
        mean.y_max + (observed.y_max - mean.y_max) * inv,
    )


def _merge_overlapping(case: _CaseState, match_iou: float) -> None:
    """Merge mined entries whose boxes overlap at the match threshold.

    The earlier entry absorbs the later one: aligned hit bits are OR-ed
    (histories are suffix-aligned because every mined entry is extended on
    every visit after creation) and boxes combine as an observation-count
    weighted mean. Repeats until no mined pair overlaps.
    """
    while True:
        mined_idx = [i for i, e in enumerate(case.entries) if e.origin == MINED]
        merged = False
        for a_pos in range(len(mined_idx)):
            for b_pos in range(a_pos + 1, len(mined_idx)):
                keep = case.entries[mined_idx[a_pos]]
                drop = case.entries[mined_idx[b_pos]]
                if iou(keep.box, drop.box) < match_iou:
                    continue
                ck, cd = keep.match_count, drop.match_count
                w = cd / (ck + cd)
                keep.box = Box2D(
                    keep.box.x_min + (drop.box.x_min - keep.box.x_min) * w,
                    keep.box.y_min + (drop.box.y_min - keep.box.y_min) * w,
                    keep.box.x_max + (drop.box.x_max - keep.box.x_max) * w,
                    keep.box.y_max + (drop.box.y_max - keep.box.y_max) * w,
                )
                overlap = len(drop.hit_history)
                head = keep.hit_history[:-overlap] if overlap else list(keep.hit_history)
                tail = keep.hit_history[len(head):]
                keep.hit_history = head + [
                    max(x, y) for x, y in zip(tail, drop.hit_history)
                ]
                del case.entries[mined_idx[b_pos]]
                merged = True
                break
            if merged:
                break
        if not merged:
            return


def _parse_kv(tokens: list[str], keys: tuple[str, ...], offset: int) -> dict[str, float]:
    values: dict[str, float] = {}
    for token in tokens:
        if "=" not in token:
            raise SnapshotError(f"malformed key=value token {token!r}", offset)
        key, _, raw = token.partition("=")
        try:
            values[key] = float(raw)
        except ValueError:
            raise SnapshotError(f"invalid float for {key!r}: {raw!r}", offset) from None
    missing = [k for k in keys if k not in values]
    if missing:
        raise SnapshotError(f"thresholds line missing {missing}", offset)
    return values


def _parse_int(raw: str, name: str, offset: int) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise SnapshotError(f"invalid integer for {name}: {raw!r}", offset) from None
    if value < 0:
        raise SnapshotError(f"{name} must be >= 0, got {value}", offset)
    return value


def _parse_entry(tokens: list[str], case_id: str, visits: int, offset: int) -> BankEntry:
    if len(tokens) != 9:
        raise SnapshotError(f"entry line has {len(tokens)} tokens, expected 9", offset)
    if tokens[1] != case_id:
        raise SnapshotError(
            f"entry case {tokens[1]!r} does not match enclosing case {case_id!r}", offset
        )
    origin = tokens[2]
    if origin not in (GROUND_TRUTH, MINED):
        raise SnapshotError(f"unknown origin {origin!r}", offset)
    try:
        coords = [float(t) for t in tokens[3:7]]
    except ValueError:
        raise SnapshotError(f"invalid box coordinates {tokens[3:7]!r}", offset) from None
    try:
        box = Box2D(*coords)
    except ValueError as exc:
        raise SnapshotError(f"invalid box: {exc}", offset) from None
    if not tokens[7].startswith("created="):
        raise SnapshotError("entry missing created= field", offset)
    created = _parse_int(tokens[7][len("created="):], "created", offset)
    if not tokens[8].startswith("hits="):
        raise SnapshotError("entry missing hits= field", offset)
    bits_raw = tokens[8][len("hits="):]
    if bits_raw == "-":
        history: list[int] = []
    else:
        if not bits_raw or any(c not in "01" for c in bits_raw):
            raise SnapshotError(f"invalid hit history {bits_raw!r}", offset)
        history = [int(c) for c in bits_raw]
    if origin == GROUND_TRUTH:
        if created != 0 or history:
            raise SnapshotError("ground-truth entry with mined fields", offset)
    else:
        if created < 1:
            raise SnapshotError("mined entry must have created >= 1", offset)
        if len(history) != visits - created + 1:
            raise SnapshotError(
                f"hit history length {len(history)} inconsistent with "
                f"visits={visits} created={created}",
                offset,
            )
    return BankEntry(box, origin, history, created)
