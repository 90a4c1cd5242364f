"""Seeded synthetic corpora and audio fixtures.

Dialogues come from a two-speaker turn-taking process (patient and
interviewer) whose knobs live in a :class:`ClassProfile`. Everything is a
pure function of the parameters and the integer seed.
"""

import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ValidationError
from .speechrate import AudioBuffer
from .timeline import Dialogue, Label, Role, TurnRecord

SYLLABLES_PER_WORD = 1.5
MIN_TURN_S = 0.3
MIN_GAP_S = 0.08
PATIENT_ID = "patient"
OTHER_ID = "interviewer"


@dataclass(frozen=True)
class ClassProfile:
    name: Label
    turn_duration_mean_s: float
    turn_duration_sd_s: float
    pause_mean_s: float
    switching_pause_mean_s: float
    overlap_prob: float
    self_floor_prob: float
    rate_mean: float
    rate_sd: float
    overlap_mean_s: float = 0.4

    def __post_init__(self):
        for f in ("turn_duration_mean_s", "turn_duration_sd_s", "pause_mean_s",
                  "switching_pause_mean_s", "overlap_mean_s", "rate_mean"):
            v = getattr(self, f)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValidationError(f"profile {self.name.value}: {f} must be a positive number, got {v!r}")
        if not self.rate_sd >= 0:
            raise ValidationError(f"profile {self.name.value}: rate_sd must be nonnegative")
        for f in ("overlap_prob", "self_floor_prob"):
            v = getattr(self, f)
            if not (isinstance(v, (int, float)) and 0.0 <= v <= 1.0):
                raise ValidationError(f"profile {self.name.value}: {f} must lie in [0, 1], got {v!r}")

    def to_dict(self):
        d = asdict(self)
        d["name"] = self.name.value
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown profile field(s): {', '.join(sorted(unknown))}")
        missing = {f.name for f in fields(cls) if f.name != "overlap_mean_s"} - set(d)
        if missing:
            raise ValidationError(f"profile missing field(s): {', '.join(sorted(missing))}")
        try:
            name = Label(str(d["name"]).lower())
        except ValueError:
            raise ValidationError(f"profile field 'name': unknown class {d['name']!r}") from None
        return cls(**{**d, "name": name})


# Illustrative defaults: AD dialogues have longer turns, more same-speaker
# pauses and slightly slower speech; magnitudes are not calibrated to any corpus.
DEFAULT_PROFILES = {
    Label.AD: ClassProfile(Label.AD, turn_duration_mean_s=6.0, turn_duration_sd_s=3.0,
                           pause_mean_s=2.0, switching_pause_mean_s=1.0, overlap_prob=0.08,
                           self_floor_prob=0.6, rate_mean=168.0, rate_sd=35.6),
    Label.NONAD: ClassProfile(Label.NONAD, turn_duration_mean_s=3.0, turn_duration_sd_s=2.0,
                              pause_mean_s=0.4, switching_pause_mean_s=0.6, overlap_prob=0.15,
                              self_floor_prob=0.1, rate_mean=180.8, rate_sd=28.4),
}


@dataclass(frozen=True)
class CorpusSpec:
    n_per_class: dict
    profiles: dict
    target_dialogue_s: float = 240.0
    seed: int = 0

    def __post_init__(self):
        for lab, n in self.n_per_class.items():
            if int(n) < 1:
                raise ValidationError(f"n_per_class[{lab.value}] must be at least 1")
            if lab not in self.profiles:
                raise ValidationError(f"no profile for class {lab.value}")
        if not self.target_dialogue_s > 0:
            raise ValidationError("target_dialogue_s must be positive")


@dataclass
class SyntheticDialogue:
    dialogue: Dialogue
    patient_rates: list  # syllables/min of each patient turn


@dataclass
class Corpus:
    items: list

    @property
    def dialogues(self):
        return [it.dialogue for it in self.items]

    def rates_csv(self):
        lines = ["utterance_id,dialogue_id,rate"]
        for it in self.items:
            did = it.dialogue.dialogue_id
            for k, r in enumerate(it.patient_rates):
                lines.append(f"{did}/{k:03d},{did},{r!r}")
        return "\n".join(lines) + "\n"


def _lognormal(rng, mean, sd):
    sigma2 = math.log1p((sd / mean) ** 2)
    return float(rng.lognormal(math.log(mean) - sigma2 / 2.0, math.sqrt(sigma2)))


def gen_dialogue(p, target_s, seed, dialogue_id="dlg", label=None):
    """Simulate one dialogue; times are rounded to whole milliseconds.

    The interviewer opens. After each turn the same speaker keeps the floor
    with probability ``self_floor_prob`` (a pause follows), otherwise the
    floor switches, either across a switching pause or, with probability
    ``overlap_prob``, by starting before the current turn ends. ``label``
    defaults to the profile's class.
    """
    rng = np.random.default_rng(seed)
    turns = []
    rates = []
    speaker = OTHER_ID
    start = 0.0
    frontier = 0.0  # latest offset so far
    while True:
        dur = max(MIN_TURN_S, _lognormal(rng, p.turn_duration_mean_s, p.turn_duration_sd_s))
        rate = max(60.0, float(rng.normal(p.rate_mean, p.rate_sd)))
        a = round(start, 3)
        b = round(start + dur, 3)
        words = max(1, int(round(rate * (b - a) / 60.0 / SYLLABLES_PER_WORD)))
        role = Role.PATIENT if speaker == PATIENT_ID else Role.OTHER
        turns.append(TurnRecord(speaker, role, a, b, words))
        if role is Role.PATIENT:
            rates.append(rate)
        frontier = max(frontier, b)
        if frontier >= target_s:
            break
        if rng.random() < p.self_floor_prob:
            start = frontier + MIN_GAP_S + float(rng.exponential(p.pause_mean_s))
        else:
            speaker = PATIENT_ID if speaker == OTHER_ID else OTHER_ID
            if rng.random() < p.overlap_prob:
                overlap = min(float(rng.exponential(p.overlap_mean_s)), 0.8 * (b - a))
                start = max(b - overlap, a + 0.001)
            else:
                start = frontier + MIN_GAP_S + float(rng.exponential(p.switching_pause_mean_s))
    d = Dialogue(dialogue_id, turns, p.name if label is None else label)
    if not d.patient_turns():
        # extremely short targets can end before the patient speaks
        a = round(frontier + MIN_GAP_S, 3)
        rate = max(60.0, float(rng.normal(p.rate_mean, p.rate_sd)))
        d.turns.append(TurnRecord(PATIENT_ID, Role.PATIENT, a, round(a + MIN_TURN_S, 3),
                                  max(1, int(round(rate * MIN_TURN_S / 60.0 / SYLLABLES_PER_WORD)))))
        rates.append(rate)
    return SyntheticDialogue(d.validate(), rates)


def gen_corpus(spec):
    """All dialogues of a corpus; dialogue i (AD first, then NonAD) uses seed + i."""
    items = []
    i = 0
    for lab in (Label.AD, Label.NONAD):
        for _ in range(int(spec.n_per_class.get(lab, 0))):
            items.append(gen_dialogue(spec.profiles[lab], spec.target_dialogue_s, spec.seed + i,
                                      dialogue_id=f"dlg{i:03d}", label=lab))
            i += 1
    return Corpus(items)


def default_spec(n_ad=21, n_nonad=17, seed=0, target_dialogue_s=240.0, profiles=None):
    return CorpusSpec({Label.AD: n_ad, Label.NONAD: n_nonad},
                      dict(profiles or DEFAULT_PROFILES), target_dialogue_s, seed)


def load_profiles(text):
    """Profile JSON: either a list of profile objects or ``{"ad": {...}, "nonad": {...}}``."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"profile JSON: {exc.msg}") from None
    if isinstance(obj, dict):
        obj = [{"name": k, **v} for k, v in obj.items()]
    profiles = {}
    for entry in obj:
        prof = ClassProfile.from_dict(entry)
        profiles[prof.name] = prof
    return profiles


def dump_profiles(profiles):
    return json.dumps({lab.value: {k: v for k, v in p.to_dict().items() if k != "name"}
                       for lab, p in profiles.items()}, indent=2) + "\n"


# -------------------------------------------------------------------- audio


def gen_voiced_audio(n_bursts, burst_s=0.15, gap_s=0.15, f0_hz=120.0, sample_rate_hz=16000,
                     voiced=True, amplitude=0.5, seed=0, formant_hz=700.0, bandwidth_hz=120.0,
                     ramp_s=0.02):
    """Bursts separated by digital silence; returns ``(AudioBuffer, n_bursts)``.

    Voiced bursts are an impulse train at ``f0_hz`` driving a decaying
    resonance; unvoiced bursts are white noise with the same RMS. Both get
    raised-cosine on/off ramps. The signal starts and ends with a gap.
    """
    sr = int(sample_rate_hz)
    nb = int(round(burst_s * sr))
    ng = int(round(gap_s * sr))
    gap = np.zeros(ng)
    if n_bursts <= 0:
        return AudioBuffer(sr, np.zeros(max(ng, 1))), 0
    if voiced and not 75.0 <= f0_hz <= 400.0:
        raise ValidationError("f0_hz must lie in 75-400 Hz for voiced bursts")

    period = sr / f0_hz
    excitation = np.zeros(nb)
    excitation[np.round(np.arange(0, nb, period)).astype(int).clip(0, nb - 1)] = 1.0
    klen = min(nb, int(0.03 * sr))
    tk = np.arange(klen) / sr
    kernel = np.exp(-math.pi * bandwidth_hz * tk) * np.sin(2 * math.pi * formant_hz * tk)
    voiced_burst = np.convolve(excitation, kernel)[:nb]
    voiced_burst /= np.max(np.abs(voiced_burst))

    nr = min(int(round(ramp_s * sr)), nb // 2)
    env = np.ones(nb)
    if nr > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(nr) / nr)
        env[:nr] = ramp
        env[nb - nr:] = ramp[::-1]
    target_rms = np.sqrt(np.mean((voiced_burst * env * amplitude) ** 2))

    rng = np.random.default_rng(seed)
    parts = [gap]
    for _ in range(n_bursts):
        if voiced:
            burst = voiced_burst * env * amplitude
        else:
            noise = rng.standard_normal(nb) * env
            burst = noise * (target_rms / np.sqrt(np.mean(noise ** 2)))
        parts.append(np.clip(burst, -1.0, 1.0))
        parts.append(gap)
    return AudioBuffer(sr, np.concatenate(parts)), int(n_bursts)
