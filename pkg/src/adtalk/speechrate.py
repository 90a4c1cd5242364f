"""Speech rate from audio (syllable nuclei) and from transcripts (rate ratio).

The nuclei detector follows the usual intensity-peak recipe: an intensity
contour in dB, a silence threshold relative to the loudest frame, peaks
that rise at least ``min_dip_db`` above the valley since the previous
accepted peak, and a voicing gate that rejects peaks whose surrounding
signal has no periodicity in the pitch range.
"""

import csv
import io
import math
import wave
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import EmptyInputError, InsufficientAudioError, ValidationError, WavFormatError

REFERENCE_WPM = 160.0
DB_FLOOR_GUARD = 1e-12


@dataclass(frozen=True)
class AudioBuffer:
    sample_rate_hz: int
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValidationError("sample rate must be positive")
        if len(self.samples) == 0:
            raise ValidationError("audio buffer is empty")
        if np.max(np.abs(self.samples)) > 1.0:
            raise ValidationError("samples must lie in [-1, 1]")

    @property
    def duration_s(self):
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class IntensityContour:
    frame_s: float
    hop_s: float
    db: np.ndarray

    def times(self):
        """Frame centre times in seconds."""
        return np.arange(len(self.db)) * self.hop_s


@dataclass(frozen=True)
class NucleiParams:
    silence_threshold_db: float | None = None  # None: max(db) - 25
    relative_threshold_db: float = -25.0
    min_dip_db: float = 2.0
    f0_min_hz: float = 75.0
    f0_max_hz: float = 400.0
    voicing_corr_min: float = 0.3
    voicing_window_s: float = 0.04
    # below this nothing counts as speech, whatever the relative threshold
    absolute_floor_db: float = -70.0


@dataclass
class NucleiResult:
    nucleus_times_s: np.ndarray
    speaking_time_s: float
    syllables_per_min: float
    warnings: list = field(default_factory=list)

    @property
    def n_nuclei(self):
        return len(self.nucleus_times_s)


@dataclass(frozen=True)
class RateSummary:
    """Mean and population variance (divide by n) of a set of rates."""

    mean: float
    variance: float
    n: int


# ---------------------------------------------------------------------- WAV


def read_wav(path):
    """Read a 16-bit PCM WAV file; stereo is averaged to mono."""
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            nframes = wf.getnframes()
            raw = wf.readframes(nframes)
    except wave.Error as exc:
        raise WavFormatError(f"{path}: unsupported 'fmt ' chunk or RIFF header ({exc})") from None
    except EOFError:
        raise OSError(f"{path}: truncated WAV file") from None
    if width != 2:
        raise WavFormatError(f"{path}: 'fmt ' chunk declares {8 * width}-bit samples; only 16-bit PCM is supported")
    if channels not in (1, 2):
        raise WavFormatError(f"{path}: 'fmt ' chunk declares {channels} channels; only mono/stereo supported")
    if len(raw) != nframes * channels * width:
        raise OSError(f"{path}: truncated 'data' chunk ({len(raw)} of {nframes * channels * width} bytes)")
    pcm = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if channels == 2:
        pcm = pcm.reshape(-1, 2).mean(axis=1)
    if pcm.size == 0:
        raise InsufficientAudioError(f"{path}: no samples")
    return AudioBuffer(rate, pcm)


def write_wav(path, audio):
    """Write mono 16-bit PCM; samples are scaled by 32768 and clipped."""
    pcm = np.clip(np.round(np.asarray(audio.samples) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(audio.sample_rate_hz))
        wf.writeframes(pcm.tobytes())


# ---------------------------------------------------------------- intensity


def intensity_contour(a, frame_s=0.025, hop_s=0.010):
    """Per-frame level ``10 log10(mean(x^2) + 1e-12)`` in dBFS.

    Frame k is centred on sample ``k * hop``; the signal is zero-padded by
    half a frame on both sides.
    """
    if not (0 < hop_s <= frame_s):
        raise ValidationError("need 0 < hop_s <= frame_s")
    x = np.asarray(a.samples, dtype=np.float64)
    flen = int(round(frame_s * a.sample_rate_hz))
    hop = max(1, int(round(hop_s * a.sample_rate_hz)))
    if x.size < flen or flen < 1:
        raise InsufficientAudioError(
            f"signal of {x.size} samples is shorter than one {frame_s * 1000:g} ms frame")
    half = flen // 2
    padded = np.concatenate((np.zeros(half), x, np.zeros(flen - half)))
    energy = np.concatenate(([0.0], np.cumsum(padded * padded)))
    n = 1 + (x.size - 1) // hop
    starts = np.arange(n) * hop
    ms = (energy[starts + flen] - energy[starts]) / flen
    db = 10.0 * np.log10(np.maximum(ms, 0.0) + DB_FLOOR_GUARD)
    return IntensityContour(flen / a.sample_rate_hz, hop / a.sample_rate_hz, db)


def voicing_strength(a, t, params=NucleiParams()):
    """Peak normalized autocorrelation in the pitch-lag range around time ``t``."""
    sr = a.sample_rate_hz
    half = int(round(params.voicing_window_s * sr / 2))
    c = int(round(t * sr))
    seg = np.asarray(a.samples[max(0, c - half):c + half], dtype=np.float64)
    if seg.size < 4:
        return 0.0
    seg = seg - seg.mean()
    lag_min = max(1, int(math.floor(sr / params.f0_max_hz)))
    lag_max = int(math.ceil(sr / params.f0_min_hz))
    return _kernels.max_autocorr(seg, lag_min, lag_max)


def _local_maxima(db):
    """Indices of peaks; a plateau counts once, at its first frame."""
    out = []
    n = len(db)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and db[j + 1] == db[i]:
            j += 1
        left_ok = i == 0 or db[i - 1] < db[i]
        right_ok = j == n - 1 or db[j + 1] < db[i]
        if left_ok and right_ok and n > 1:
            out.append(i)
        i = j + 1
    return out


def detect_syllable_nuclei(a, c=None, params=NucleiParams()):
    """Count syllable nuclei and derive syllables per minute of speaking time."""
    if c is None:
        c = intensity_contour(a)
    db = np.asarray(c.db, dtype=np.float64)
    if db.size == 0:
        raise InsufficientAudioError("empty intensity contour")
    if params.silence_threshold_db is not None:
        threshold = params.silence_threshold_db
    else:
        threshold = float(db.max()) + params.relative_threshold_db
    threshold = max(threshold, params.absolute_floor_db)

    above = db > threshold
    speaking = float(np.count_nonzero(above)) * c.hop_s
    times = []
    last = None  # frame index of last accepted nucleus
    for i in _local_maxima(db):
        if not above[i]:
            continue
        if last is not None:
            valley = db[last:i + 1].min()
            if db[i] - valley < params.min_dip_db:
                continue
        t = i * c.hop_s
        if voicing_strength(a, t, params) < params.voicing_corr_min:
            continue
        times.append(t)
        last = i

    warnings = []
    if speaking <= 0:
        warnings.append("no frames above the silence threshold")
        rate = 0.0
    else:
        rate = 60.0 * len(times) / speaking
    return NucleiResult(np.array(times), speaking, rate, warnings)


# -------------------------------------------------------------------- rates


def speech_rate_ratio(word_count, actual_duration_s, reference_wpm=REFERENCE_WPM, synth_duration_s=None):
    """Reference duration over actual duration.

    The reference is ``60 * words / reference_wpm`` unless an externally
    synthesized duration is given, which then replaces it.
    """
    if word_count < 0:
        raise ValidationError("word_count must be nonnegative")
    if not actual_duration_s > 0:
        raise ValidationError("actual duration must be positive")
    if synth_duration_s is not None:
        if not synth_duration_s > 0:
            raise ValidationError("synthesized duration must be positive")
        ref = float(synth_duration_s)
    else:
        if not reference_wpm > 0:
            raise ValidationError("reference_wpm must be positive")
        ref = 60.0 * word_count / reference_wpm
    return ref / actual_duration_s


def rate_summary(rates):
    x = np.asarray(list(rates), dtype=np.float64)
    if x.size == 0:
        raise EmptyInputError("no rates to summarise")
    mean = float(x.mean())
    return RateSummary(mean, float(np.mean((x - mean) ** 2)), int(x.size))


def read_synth_durations(stream):
    """``utterance_id,synth_duration_s`` CSV to a dict."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    rows = [ln for ln in stream if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(rows)
    if reader.fieldnames is None or not {"utterance_id", "synth_duration_s"} <= set(reader.fieldnames):
        raise ValidationError("synthesized-duration CSV needs utterance_id,synth_duration_s columns")
    out = {}
    for i, row in enumerate(reader, start=2):
        try:
            out[row["utterance_id"]] = float(row["synth_duration_s"])
        except ValueError:
            raise ValidationError(f"synthesized-duration row {i}: not a number") from None
    return out


_RATE_COLUMNS = ("rate", "syll_per_min", "ratio")


def read_rates_table(stream):
    """Per-utterance rates grouped by dialogue.

    Accepts any CSV with a ``dialogue_id`` column (or an ``utterance_id`` of
    the form ``<dialogue_id>/<utterance>``) and one rate column named
    ``rate``, ``syll_per_min`` or ``ratio``. Row order is preserved.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    rows = [ln for ln in stream if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(rows)
    cols = reader.fieldnames or []
    rate_col = next((c for c in _RATE_COLUMNS if c in cols), None)
    if rate_col is None:
        raise ValidationError(f"rates CSV needs one of the columns {', '.join(_RATE_COLUMNS)}")
    if "dialogue_id" not in cols and "utterance_id" not in cols:
        raise ValidationError("rates CSV needs a dialogue_id or utterance_id column")
    out = {}
    for i, row in enumerate(reader, start=2):
        did = row.get("dialogue_id") or row["utterance_id"].split("/", 1)[0]
        try:
            out.setdefault(did, []).append(float(row[rate_col]))
        except (TypeError, ValueError):
            raise ValidationError(f"rates row {i}: {rate_col} is not a number") from None
    return out
