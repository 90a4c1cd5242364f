import json

import numpy as np
import pytest

from adtalk.errors import ValidationError
from adtalk.simgen import (
    DEFAULT_PROFILES,
    ClassProfile,
    default_spec,
    dump_profiles,
    gen_corpus,
    gen_dialogue,
    gen_voiced_audio,
    load_profiles,
)
from adtalk.speechrate import voicing_strength
from adtalk.timeline import Label, Role, VocState, dump_labels, dump_turn_records, parse_turn_records, segment_events

AD = DEFAULT_PROFILES[Label.AD]
NONAD = DEFAULT_PROFILES[Label.NONAD]


def with_(p, **kw):
    return ClassProfile(**{**p.to_dict(), "name": p.name, **kw})


def test_no_overlap_means_no_joint_talk():
    p = with_(NONAD, overlap_prob=0.0)
    for seed in range(20):
        segs = segment_events(gen_dialogue(p, 120, seed).dialogue)
        assert VocState.JOINT_TALK not in {s.state for s in segs}


def test_forced_alternation_has_no_pause():
    p = with_(AD, self_floor_prob=0.0, overlap_prob=0.0)
    for seed in range(20):
        d = gen_dialogue(p, 120, seed).dialogue
        assert VocState.PAUSE not in {s.state for s in segment_events(d)}
        speakers = [t.speaker_id for t in d.turns]
        assert all(a != b for a, b in zip(speakers, speakers[1:]))


def test_turn_duration_law_of_large_numbers():
    p = with_(NONAD, turn_duration_mean_s=4.0, turn_duration_sd_s=1.5)
    durs = [t.duration_s for seed in range(1000) for t in gen_dialogue(p, 30, seed).dialogue.turns]
    assert abs(np.mean(durs) - 4.0) <= 0.05 * 4.0


def test_21_17_class_sizes_and_labels():
    corpus = gen_corpus(default_spec(21, 17, seed=3))
    labels = [d.label for d in corpus.dialogues]
    assert labels.count(Label.AD) == 21 and labels.count(Label.NONAD) == 17
    assert len({d.dialogue_id for d in corpus.dialogues}) == 38


def test_emitted_files_are_deterministic_and_reparse():
    def emit():
        c = gen_corpus(default_spec(3, 2, seed=9, target_dialogue_s=60))
        return dump_turn_records(c.dialogues), dump_labels(c.dialogues), c.rates_csv()

    a, b = emit(), emit()
    assert a == b
    from adtalk.timeline import read_labels
    back = parse_turn_records(a[0], read_labels(a[1]))
    assert len(back) == 5 and all(d.label is not None for d in back)


def test_outputs_satisfy_timeline_invariants():
    for seed in range(30):
        sd = gen_dialogue(AD, 40, seed)
        d = sd.dialogue.validate()
        assert any(t.role is Role.PATIENT for t in d.turns)
        assert len(sd.patient_rates) == len(d.patient_turns())
        assert all(t.end_s > t.start_s for t in d.turns)


def test_identical_profiles_give_identical_class_statistics():
    spec = default_spec(4, 4, seed=0, profiles={Label.AD: NONAD, Label.NONAD: NONAD})
    corpus = gen_corpus(spec)
    assert [d.label for d in corpus.dialogues] == [Label.AD] * 4 + [Label.NONAD] * 4


def test_profile_validation_names_field():
    with pytest.raises(ValidationError, match="overlap_prob"):
        with_(AD, overlap_prob=1.5)
    with pytest.raises(ValidationError, match="pause_mean_s"):
        with_(AD, pause_mean_s=0.0)
    bad = json.loads(dump_profiles(DEFAULT_PROFILES))
    bad["ad"]["turn_length"] = 3
    with pytest.raises(ValidationError, match="turn_length"):
        load_profiles(json.dumps(bad))


def test_profiles_round_trip():
    assert load_profiles(dump_profiles(DEFAULT_PROFILES)) == DEFAULT_PROFILES


def test_zero_bursts_is_silence():
    a, n = gen_voiced_audio(0)
    assert n == 0 and not a.samples.any()


def test_unvoiced_fixture_fails_voicing_gate():
    a, n = gen_voiced_audio(8, voiced=False, seed=2)
    centres = 0.15 + 0.075 + 0.3 * np.arange(n)
    assert max(voicing_strength(a, t) for t in centres) < 0.3


def test_voiced_and_unvoiced_have_equal_energy():
    v, _ = gen_voiced_audio(8)
    u, _ = gen_voiced_audio(8, voiced=False)
    assert np.sum(u.samples ** 2) == pytest.approx(np.sum(v.samples ** 2), rel=1e-9)


def test_voiced_f0_range():
    with pytest.raises(ValidationError):
        gen_voiced_audio(2, f0_hz=50)
