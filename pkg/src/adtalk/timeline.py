"""Dialogue turn ingestion and segmentation into vocalisation states.

A dialogue is a list of time-stamped speaker turns. ``segment_events``
turns it into a gap-free sequence of five vocalisation states: patient
speech, other speech, joint talk (two or more speakers at once), pause
(silence after which the same speaker keeps the floor) and switching pause
(silence after which someone else takes it).
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum

from .errors import EmptyInputError, ParseError, ValidationError


class Role(str, Enum):
    PATIENT = "patient"
    OTHER = "other"


class Label(str, Enum):
    AD = "ad"
    NONAD = "nonad"

    @property
    def sign(self):
        return 1 if self is Label.AD else -1

    @classmethod
    def from_sign(cls, s):
        return cls.AD if s > 0 else cls.NONAD


class VocState(IntEnum):
    """The five vocalisation states; the integer value fixes feature order."""

    PATIENT_SPEECH = 0
    OTHER_SPEECH = 1
    JOINT_TALK = 2
    PAUSE = 3
    SWITCHING_PAUSE = 4

    @property
    def display(self):
        return _DISPLAY[self]


_DISPLAY = {
    VocState.PATIENT_SPEECH: "PatientSpeech",
    VocState.OTHER_SPEECH: "OtherSpeech",
    VocState.JOINT_TALK: "JointTalk",
    VocState.PAUSE: "Pause",
    VocState.SWITCHING_PAUSE: "SwitchingPause",
}

N_STATES = len(VocState)
DEFAULT_MIN_EVENT_S = 0.05
# float slack when comparing durations, so 0.248 - 0.198 counts as 50 ms
TIME_TOL_S = 1e-9


@dataclass(frozen=True)
class TurnRecord:
    speaker_id: str
    role: Role
    start_s: float
    end_s: float
    word_count: int | None = None

    def __post_init__(self):
        if not (math.isfinite(self.start_s) and math.isfinite(self.end_s)):
            raise ValidationError(f"turn of {self.speaker_id!r}: non-finite time stamp")
        if self.start_s < 0:
            raise ValidationError(f"turn of {self.speaker_id!r} at {self.start_s}: negative start_s")
        if not self.end_s > self.start_s:
            raise ValidationError(
                f"turn of {self.speaker_id!r} [{self.start_s}, {self.end_s}]: end_s must exceed start_s")
        if self.word_count is not None and self.word_count < 0:
            raise ValidationError(f"turn of {self.speaker_id!r}: negative word count")

    @property
    def duration_s(self):
        return self.end_s - self.start_s


@dataclass
class Dialogue:
    dialogue_id: str
    turns: list
    label: Label | None = None
    audio_path: str | None = None

    def __post_init__(self):
        self.turns = sorted(self.turns, key=lambda t: (t.start_s, t.end_s, t.speaker_id))

    def validate(self):
        """Check the full dialogue invariants (roles consistent, both roles present)."""
        roles = {}
        for t in self.turns:
            if roles.setdefault(t.speaker_id, t.role) is not t.role:
                raise ValidationError(
                    f"dialogue {self.dialogue_id!r}: speaker {t.speaker_id!r} appears with two roles")
        present = set(roles.values())
        if Role.PATIENT not in present or Role.OTHER not in present:
            raise ValidationError(
                f"dialogue {self.dialogue_id!r}: needs at least one patient and one other turn")
        return self

    def patient_turns(self):
        return [t for t in self.turns if t.role is Role.PATIENT]

    @property
    def start_s(self):
        return min(t.start_s for t in self.turns)

    @property
    def end_s(self):
        return max(t.end_s for t in self.turns)

    @property
    def duration_s(self):
        return self.end_s - self.start_s


@dataclass(frozen=True)
class EventSegment:
    state: VocState
    start_s: float
    end_s: float

    @property
    def duration_s(self):
        return self.end_s - self.start_s


# ------------------------------------------------------------------ parsing


def _parse_role(value, line_no):
    try:
        return Role(str(value).strip().lower())
    except ValueError:
        raise ValidationError(f"line {line_no}: unknown role {value!r} (expected 'patient' or 'other')") from None


def parse_turn_records(stream, labels=None):
    """Read JSONL turn records into dialogues, in order of first appearance.

    ``stream`` is an iterable of lines (an open file works). Blank lines and
    lines starting with ``#`` are skipped. ``labels`` optionally maps
    dialogue_id to :class:`Label`.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    grouped = {}
    audio = {}
    for line_no, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", line_no) from None
        if not isinstance(obj, dict):
            raise ParseError("expected a JSON object", line_no)
        try:
            did = str(obj["dialogue_id"])
            speaker = str(obj["speaker"])
            start = float(obj["start_s"])
            end = float(obj["end_s"])
        except KeyError as exc:
            raise ParseError(f"missing field {exc.args[0]!r}", line_no) from None
        except (TypeError, ValueError):
            raise ParseError("start_s/end_s must be numbers", line_no) from None
        role = _parse_role(obj.get("role"), line_no)
        words = obj.get("words")
        if words is not None:
            if isinstance(words, bool) or not isinstance(words, int):
                raise ParseError("words must be an integer", line_no)
        try:
            turn = TurnRecord(speaker, role, start, end, words)
        except ValidationError as exc:
            raise ValidationError(f"line {line_no}: dialogue {did!r}: {exc}") from None
        grouped.setdefault(did, []).append(turn)
        if obj.get("audio_path"):
            audio[did] = str(obj["audio_path"])

    dialogues = []
    for did, turns in grouped.items():
        label = labels.get(did) if labels else None
        dialogues.append(Dialogue(did, turns, label, audio.get(did)).validate())
    return dialogues


def read_labels(stream):
    """Read the ``dialogue_id,label`` sidecar CSV into a dict of :class:`Label`."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    rows = [ln for ln in stream if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(rows)
    if reader.fieldnames is None or not {"dialogue_id", "label"} <= set(reader.fieldnames):
        raise ParseError("label CSV needs a 'dialogue_id,label' header")
    out = {}
    for i, row in enumerate(reader, start=2):
        try:
            out[row["dialogue_id"]] = Label(row["label"].strip().lower())
        except ValueError:
            raise ValidationError(f"label row {i}: unknown label {row['label']!r}") from None
    return out


def dump_turn_records(dialogues):
    """Serialize dialogues as JSONL text (inverse of :func:`parse_turn_records`)."""
    lines = []
    for d in dialogues:
        for t in d.turns:
            obj = {"dialogue_id": d.dialogue_id, "speaker": t.speaker_id, "role": t.role.value,
                   "start_s": t.start_s, "end_s": t.end_s}
            if t.word_count is not None:
                obj["words"] = t.word_count
            lines.append(json.dumps(obj))
    return "".join(line + "\n" for line in lines)


def dump_labels(dialogues):
    lines = ["dialogue_id,label"]
    lines += [f"{d.dialogue_id},{d.label.value}" for d in dialogues if d.label is not None]
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------- segmentation


def _elementary_intervals(turns):
    """Split the timeline at every turn boundary; yield (start, end, active speakers)."""
    bounds = sorted({t.start_s for t in turns} | {t.end_s for t in turns})
    out = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        active = frozenset(t.speaker_id for t in turns if t.start_s < b and t.end_s > a)
        out.append((a, b, active))
    return out


def segment_events(d, min_event_s=DEFAULT_MIN_EVENT_S):
    """Segment a dialogue into abutting :class:`EventSegment` runs.

    Speech by exactly one speaker maps to that speaker's role; two or more
    simultaneous speakers give joint talk. Each silence is a pause when the
    last single speaker before it is the same speaker as the first single
    speaker after it, otherwise a switching pause (also when either side has
    no single speaker at all). Segments shorter than ``min_event_s`` are
    absorbed by the preceding segment (the following one for the very first
    segment), then equal neighbours are merged.
    """
    if not d.turns:
        raise EmptyInputError(f"dialogue {d.dialogue_id!r} has no turns")
    if not min_event_s > 0:
        raise ValidationError("min_event_s must be positive")
    role_of = {t.speaker_id: t.role for t in d.turns}
    pieces = _elementary_intervals(d.turns)

    # floor holder (single speaker) per piece, None otherwise
    solo = [next(iter(act)) if len(act) == 1 else None for _, _, act in pieces]
    prev_solo = []
    last = None
    for s in solo:
        prev_solo.append(last)
        if s is not None:
            last = s
    next_solo = [None] * len(pieces)
    nxt = None
    for i in range(len(pieces) - 1, -1, -1):
        next_solo[i] = nxt
        if solo[i] is not None:
            nxt = solo[i]

    raw = []
    for i, (a, b, act) in enumerate(pieces):
        if len(act) >= 2:
            state = VocState.JOINT_TALK
        elif len(act) == 1:
            state = VocState.PATIENT_SPEECH if role_of[solo[i]] is Role.PATIENT else VocState.OTHER_SPEECH
        elif prev_solo[i] is not None and prev_solo[i] == next_solo[i]:
            state = VocState.PAUSE
        else:
            state = VocState.SWITCHING_PAUSE
        raw.append([state, a, b])

    return _merge_short(_coalesce(raw), min_event_s)


def _coalesce(runs):
    out = []
    for state, a, b in runs:
        if out and out[-1][0] == state:
            out[-1][2] = b
        else:
            out.append([state, a, b])
    return out


def _merge_short(runs, min_event_s):
    merged = []
    pending_head = None  # short leading run waiting for a successor
    for state, a, b in runs:
        short = (b - a) < min_event_s - TIME_TOL_S
        if short and merged:
            merged[-1][2] = b
            continue
        if short and not merged:
            pending_head = a if pending_head is None else pending_head
            continue
        if pending_head is not None:
            a = pending_head
            pending_head = None
        merged.append([state, a, b])
    if not merged:
        # every run shorter than the minimum: keep the longest as one segment
        state, a, b = max(runs, key=lambda r: r[2] - r[1])
        merged = [[state, runs[0][1], runs[-1][2]]]
    return [EventSegment(VocState(s), a, b) for s, a, b in _coalesce(merged)]


# --------------------------------------------------------------- statistics

# Normalised total turn duration is reported as this multiple of the
# (class patient-turn time) / (class dialogue time) ratio.
NORM_TURN_DURATION_SCALE = 10.0

STAT_ROWS = (
    ("Dialogue duration", "dialogue_duration_s"),
    ("Avg turn duration", "avg_turn_duration_s"),
    ("Total turn duration", "total_turn_duration_s"),
    ("Norm. total turn duration", "normalised_total_turn_duration"),
    ("Avg number of words", "avg_word_count"),
    ("Total number of words", "total_word_count"),
    ("Avg words per minute", "avg_words_per_minute"),
)


@dataclass
class TurnStats:
    """Per-class aggregates over patient turns.

    ``dialogue_duration_s`` and the totals are sums over the class; the
    ``avg_*`` fields are means over dialogues (one patient per dialogue).
    Word-based fields are ``None`` when no turn in the class has a count.
    """

    n_dialogues: int
    dialogue_duration_s: float
    avg_turn_duration_s: float
    total_turn_duration_s: float
    normalised_total_turn_duration: float
    avg_word_count: float | None = None
    total_word_count: int | None = None
    avg_words_per_minute: float | None = None
    extra: dict = field(default_factory=dict)


def descriptive_stats(corpus):
    """Table-style turn statistics per class; absent classes map to ``None``."""
    by_class = {lab: [] for lab in Label}
    for d in corpus:
        if d.label is None:
            raise ValidationError(f"dialogue {d.dialogue_id!r} is unlabeled")
        by_class[d.label].append(d)

    out = {}
    for lab, dialogues in by_class.items():
        if not dialogues:
            out[lab] = None
            continue
        n = len(dialogues)
        dlg_total = sum(d.duration_s for d in dialogues)
        per_dlg_time = [sum(t.duration_s for t in d.patient_turns()) for d in dialogues]
        turn_total = sum(per_dlg_time)
        words, wpm = [], []
        for d, ptime in zip(dialogues, per_dlg_time):
            counted = [t for t in d.patient_turns() if t.word_count is not None]
            if not counted:
                continue
            w = sum(t.word_count for t in counted)
            words.append(w)
            secs = sum(t.duration_s for t in counted)
            if secs > 0:
                wpm.append(60.0 * w / secs)
        out[lab] = TurnStats(
            n_dialogues=n,
            dialogue_duration_s=dlg_total,
            avg_turn_duration_s=turn_total / n,
            total_turn_duration_s=turn_total,
            normalised_total_turn_duration=NORM_TURN_DURATION_SCALE * turn_total / dlg_total,
            avg_word_count=sum(words) / len(words) if words else None,
            total_word_count=sum(words) if words else None,
            avg_words_per_minute=sum(wpm) / len(wpm) if wpm else None,
        )
    return out


def stats_csv(stats, header_lines=()):
    """Render :func:`descriptive_stats` output as CSV, one row per statistic."""
    buf = io.StringIO()
    for h in header_lines:
        buf.write(f"# {h}\n")
    buf.write(f"# normalised total turn duration = {NORM_TURN_DURATION_SCALE:g} x "
              "class patient-turn time / class dialogue time\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature", "non-AD", "AD"])
    for name, attr in STAT_ROWS:
        row = [name]
        for lab in (Label.NONAD, Label.AD):
            st = stats.get(lab)
            val = None if st is None else getattr(st, attr)
            row.append("" if val is None else f"{val:.1f}")
        w.writerow(row)
    return buf.getvalue()
