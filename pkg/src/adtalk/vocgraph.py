"""Vocalisation graphs: sampled Markov chains over dialogue states.

The segmented timeline is sampled at a fixed frame step, first-order
transition counts are taken between consecutive frames, and the resulting
row-stochastic matrix plus the state occupancy form the graph. Feature
vectors flatten the graph in a fixed order:

    f00..f24  transition probabilities, row-major over VocState order
    f25..f29  steady-state (occupancy) probabilities
    f30, f31  speech-rate mean and population variance (VGS only)
"""

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import EmptyInputError, InsufficientDataError, ValidationError
from .speechrate import rate_summary
from .timeline import DEFAULT_MIN_EVENT_S, N_STATES, Label, VocState, segment_events

DEFAULT_FRAME_DT_S = 0.1
N_VGO = N_STATES * N_STATES + N_STATES
N_VGS = N_VGO + 2
STOCHASTIC_TOL = 1e-9


class Schema(str, Enum):
    VGO = "vgo"
    VGS = "vgs"

    @property
    def width(self):
        return N_VGO if self is Schema.VGO else N_VGS


@dataclass(frozen=True)
class StateFrames:
    frame_dt_s: float
    states: np.ndarray  # int64 VocState values

    def __post_init__(self):
        if not self.frame_dt_s > 0:
            raise ValidationError("frame_dt_s must be positive")
        if len(self.states) == 0:
            raise ValidationError("StateFrames needs at least one frame")


@dataclass(frozen=True)
class VocalisationGraph:
    counts: np.ndarray
    probs: np.ndarray
    steady: np.ndarray
    frame_dt_s: float | None = None

    def check(self):
        rows = self.counts.sum(axis=1)
        sums = self.probs.sum(axis=1)
        for i in range(N_STATES):
            if rows[i] > 0 and abs(sums[i] - 1.0) > STOCHASTIC_TOL:
                raise ValidationError(f"row {i} of probs sums to {sums[i]!r}")
            if rows[i] == 0 and np.any(self.probs[i] != 0) and abs(sums[i] - 1.0) > STOCHASTIC_TOL:
                raise ValidationError(f"row {i} is neither empty nor a distribution")
        if abs(self.steady.sum() - 1.0) > STOCHASTIC_TOL or np.any(self.steady < 0):
            raise ValidationError("steady-state vector is not a distribution")
        return self

    def to_json(self, **meta):
        obj = dict(meta)
        obj.update({
            "states": [s.display for s in VocState],
            "frame_dt_s": self.frame_dt_s,
            "counts": self.counts.tolist(),
            "probs": self.probs.tolist(),
            "steady": self.steady.tolist(),
        })
        return json.dumps(obj, indent=1)

    def to_dot(self, name="vocgraph", min_prob=0.01):
        """Graphviz text of the diagram: nodes carry steady state, edges probabilities."""
        lines = [f'digraph "{name}" {{', "  rankdir=LR;"]
        for s in VocState:
            lines.append(f'  {s.display} [label="{s.display}\\n{self.steady[s]:.3f}"];')
        for i in VocState:
            for j in VocState:
                p = self.probs[i, j]
                if p >= min_prob:
                    lines.append(f'  {i.display} -> {j.display} [label="{p:.3f}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def sample_chain(segments, frame_dt_s=DEFAULT_FRAME_DT_S):
    """Sample the state active at each frame midpoint.

    Frame k is taken at ``start + (k + 0.5) * frame_dt_s``; the number of
    frames is ``floor(duration / frame_dt_s)`` (at least one).
    """
    if not segments:
        raise EmptyInputError("no segments to sample")
    if not frame_dt_s > 0:
        raise ValidationError("frame_dt_s must be positive")
    t0 = segments[0].start_s
    total = segments[-1].end_s - t0
    # absorb float noise such as 1.0 / 0.1 == 9.999...
    n = max(1, int(np.floor(total / frame_dt_s + 1e-9)))
    ends = np.array([s.end_s for s in segments])
    codes = np.array([int(s.state) for s in segments], dtype=np.int64)
    mids = t0 + (np.arange(n) + 0.5) * frame_dt_s
    idx = np.searchsorted(ends, mids, side="right")
    np.minimum(idx, len(segments) - 1, out=idx)
    return StateFrames(frame_dt_s, codes[idx])


def transition_matrix(frames, smoothing=False):
    """Estimate the vocalisation graph from a sampled chain.

    ``steady`` is the empirical occupancy (fraction of frames per state).
    With ``smoothing`` every count gets +1 before normalisation.
    """
    states = np.asarray(frames.states, dtype=np.int64)
    if states.size < 2:
        raise InsufficientDataError("need at least two frames for transitions")
    counts = _kernels.transition_counts(states, N_STATES)
    est = counts + 1 if smoothing else counts
    rows = est.sum(axis=1, keepdims=True)
    probs = np.divide(est, rows, out=np.zeros((N_STATES, N_STATES)), where=rows > 0)
    steady = np.bincount(states, minlength=N_STATES) / states.size
    return VocalisationGraph(counts, probs, steady, frames.frame_dt_s).check()


class Stationary(NamedTuple):
    pi: np.ndarray
    iterations: int
    converged: bool


def stationary_distribution(probs, tol=1e-12, max_iter=100_000):
    """Power iteration ``pi <- pi P`` from the uniform vector."""
    P = np.asarray(probs, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValidationError("transition matrix must be square")
    if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > STOCHASTIC_TOL):
        raise ValidationError("every row must be a probability distribution")
    pi = np.full(P.shape[0], 1.0 / P.shape[0])
    for it in range(1, max_iter + 1):
        nxt = pi @ P
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < tol:
            return Stationary(nxt, it, True)
        pi = nxt
    return Stationary(pi, max_iter, False)


# ----------------------------------------------------------------- features


@dataclass(frozen=True)
class FeatureVector:
    dialogue_id: str
    label: Label | None
    schema: Schema
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != self.schema.width:
            raise ValidationError(
                f"{self.schema.name} vector needs {self.schema.width} values, got {len(self.values)}")


def vgo_features(g, dialogue_id, label=None):
    values = np.concatenate((np.asarray(g.probs, dtype=np.float64).ravel(),
                             np.asarray(g.steady, dtype=np.float64)))
    return FeatureVector(dialogue_id, label, Schema.VGO, values)


def vgs_features(g, rate, dialogue_id, label=None):
    if rate is None:
        raise ValidationError(
            f"dialogue {dialogue_id!r}: no speech-rate summary; use the VGO schema or supply rates")
    if rate.n < 1:
        raise ValidationError("rate summary must cover at least one value")
    base = vgo_features(g, dialogue_id, label).values
    values = np.concatenate((base, [float(rate.mean), float(rate.variance)]))
    return FeatureVector(dialogue_id, label, Schema.VGS, values)


def probs_from_vector(values):
    """Inverse of the feature layout: (probs 5x5, steady 5)."""
    v = np.asarray(values, dtype=np.float64)
    k = N_STATES * N_STATES
    return v[:k].reshape(N_STATES, N_STATES), v[k:k + N_STATES]


def dialogue_graph(dialogue, frame_dt_s=DEFAULT_FRAME_DT_S, min_event_s=DEFAULT_MIN_EVENT_S,
                   smoothing=False):
    segs = segment_events(dialogue, min_event_s)
    return transition_matrix(sample_chain(segs, frame_dt_s), smoothing=smoothing)


FEATURE_COLUMNS = [f"f{i:02d}" for i in range(N_VGS)]


def features_csv(vectors, header_lines=()):
    buf = io.StringIO()
    for h in header_lines:
        buf.write(f"# {h}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dialogue_id", "label", "schema", *FEATURE_COLUMNS])
    for fv in vectors:
        cells = [repr(float(x)) for x in fv.values]
        cells += [""] * (N_VGS - len(cells))
        w.writerow([fv.dialogue_id, "" if fv.label is None else fv.label.value, fv.schema.value, *cells])
    return buf.getvalue()


def read_features_csv(stream):
    """Parse a feature CSV back into :class:`FeatureVector` objects."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    rows = [ln for ln in stream if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(rows)
    if reader.fieldnames is None or reader.fieldnames[:3] != ["dialogue_id", "label", "schema"]:
        raise ValidationError("feature CSV header must start with dialogue_id,label,schema")
    out = []
    for i, row in enumerate(reader, start=2):
        try:
            schema = Schema(row["schema"].strip().lower())
        except ValueError:
            raise ValidationError(f"feature row {i}: unknown schema {row['schema']!r}") from None
        try:
            values = np.array([float(row[c]) for c in FEATURE_COLUMNS[:schema.width]])
        except (TypeError, ValueError):
            raise ValidationError(f"feature row {i}: missing or non-numeric feature value") from None
        lab = row["label"].strip().lower()
        out.append(FeatureVector(row["dialogue_id"], Label(lab) if lab else None, schema, values))
    return out



def build_features(dialogues, schema=Schema.VGO, rates=None, frame_dt_s=DEFAULT_FRAME_DT_S,
                   min_event_s=DEFAULT_MIN_EVENT_S, smoothing=False):
    """Feature vectors (and graphs) for a list of dialogues.

    ``rates`` maps dialogue_id to a list of per-utterance speech rates and
    is required for the VGS schema.
    """
    schema = Schema(schema)
    vectors, graphs = [], []
    for d in dialogues:
        g = dialogue_graph(d, frame_dt_s, min_event_s, smoothing)
        if schema is Schema.VGS:
            vals = (rates or {}).get(d.dialogue_id)
            fv = vgs_features(g, rate_summary(vals) if vals else None, d.dialogue_id, d.label)
        else:
            fv = vgo_features(g, d.dialogue_id, d.label)
        vectors.append(fv)
        graphs.append(g)
    return vectors, graphs


def to_arrays(vectors):
    """``(X, y, ids)`` with y = +1 for AD and -1 for NonAD."""
    if not vectors:
        raise EmptyInputError("no feature vectors")
    widths = {len(fv.values) for fv in vectors}
    if len(widths) != 1:
        raise ValidationError("feature vectors of mixed schema")
    if any(fv.label is None for fv in vectors):
        raise ValidationError("every feature vector needs a label for training")
    X = np.vstack([fv.values for fv in vectors])
    y = np.array([fv.label.sign for fv in vectors], dtype=np.int64)
    return X, y, [fv.dialogue_id for fv in vectors]
