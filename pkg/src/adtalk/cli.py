"""Command-line pipeline: simulate, extract, rate, evaluate, stats.

Parameter precedence is flags > ``--config`` file (flat ``key=value``
lines) > built-in defaults. Every output file starts with a header naming
the tool version, a hash of the effective configuration and the seed, so
identical invocations produce identical bytes.
"""

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .boosting import TRAINERS, train_real_adaboost
from .errors import AdtalkError, ValidationError
from .evalstats import compute_metrics, cross_validate, loocv, pearson_test, roc_smoothed
from .simgen import DEFAULT_PROFILES, default_spec, dump_profiles, gen_corpus, load_profiles
from .speechrate import (
    detect_syllable_nuclei,
    rate_summary,
    read_rates_table,
    read_synth_durations,
    read_wav,
    speech_rate_ratio,
)
from .timeline import (
    Label,
    descriptive_stats,
    dump_labels,
    dump_turn_records,
    parse_turn_records,
    read_labels,
    stats_csv,
)
from .vocgraph import Schema, build_features, features_csv, read_features_csv, to_arrays

DEFAULTS = {
    "schema": "vgo",
    "frame_dt": 0.1,
    "min_event": 0.05,
    "rounds": 10,
    "k": 10,
    "seed": None,
    "roc_rounds": 10,
    "out": ".",
    "n_ad": 21,
    "n_nonad": 17,
    "target_s": 240.0,
    "model": "adaboost",
    "dot_threshold": 0.01,
    "reference_wpm": 160.0,
}
_TYPES = {"frame_dt": float, "min_event": float, "rounds": int, "k": int, "seed": int,
          "roc_rounds": int, "n_ad": int, "n_nonad": int, "target_s": float,
          "dot_threshold": float, "reference_wpm": float}
STOCHASTIC = {"simulate", "evaluate"}


class UsageError(AdtalkError):
    pass


def read_config(path):
    cfg = {}
    for i, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{i}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        cfg[key.replace("-", "_")] = val
    return cfg


def effective_config(args, keys):
    cfg = {k: DEFAULTS.get(k) for k in keys}
    if getattr(args, "config", None):
        for k, v in read_config(args.config).items():
            if k in cfg:
                cfg[k] = v
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    for k, typ in _TYPES.items():
        if k in cfg and cfg[k] is not None:
            try:
                cfg[k] = typ(cfg[k])
            except ValueError:
                raise UsageError(f"{k}: cannot parse {cfg[k]!r} as {typ.__name__}") from None
    for k in ("frame_dt", "min_event", "target_s", "reference_wpm"):
        if k in cfg and not cfg[k] > 0:
            raise UsageError(f"{k} must be positive")
    for k in ("rounds", "roc_rounds", "n_ad", "n_nonad"):
        if k in cfg and cfg[k] < 1:
            raise UsageError(f"{k} must be at least 1")
    if "k" in cfg and cfg["k"] < 2:
        raise UsageError("k must be at least 2")
    if "schema" in cfg:
        try:
            cfg["schema"] = Schema(str(cfg["schema"]).lower()).value
        except ValueError:
            raise UsageError(f"schema must be vgo or vgs, got {cfg['schema']!r}") from None
    return cfg


def _meta(cmd, cfg):
    blob = json.dumps({"cmd": cmd, **cfg}, sort_keys=True, default=str)
    digest = hashlib.sha256(blob.encode()).hexdigest()[:12]
    seed = cfg.get("seed")
    return {"tool": "adtalk", "version": __version__, "command": cmd, "config_hash": digest,
            "seed": seed, "config": json.loads(blob)}


def _header_lines(meta):
    return [f"{meta['tool']} {meta['version']} {meta['command']} config={meta['config_hash']} seed={meta['seed']}",
            "config " + json.dumps(meta["config"], sort_keys=True)]


def _write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _json(obj):
    return json.dumps(obj, indent=1, sort_keys=False) + "\n"


def _load_dialogues(turns_path, labels_path=None):
    labels = read_labels(Path(labels_path).read_text()) if labels_path else None
    with open(turns_path) as fh:
        return parse_turn_records(fh, labels)


# ------------------------------------------------------------------ commands


def cmd_simulate(args):
    cfg = effective_config(args, ["n_ad", "n_nonad", "target_s", "seed", "out"])
    cfg["profiles"] = args.profiles
    profiles = dict(DEFAULT_PROFILES)
    if args.profiles:
        profiles.update(load_profiles(Path(args.profiles).read_text()))
    spec = default_spec(cfg["n_ad"], cfg["n_nonad"], cfg["seed"], cfg["target_s"], profiles)
    corpus = gen_corpus(spec)
    meta = _meta("simulate", cfg)
    head = "".join(f"# {h}\n" for h in _header_lines(meta))
    out = Path(cfg["out"])
    _write(out / "turns.jsonl", head + dump_turn_records(corpus.dialogues))
    _write(out / "labels.csv", head + dump_labels(corpus.dialogues))
    _write(out / "rates.csv", head + corpus.rates_csv())
    _write(out / "profiles.json", dump_profiles(profiles))
    for lab in Label:
        n = sum(d.label is lab for d in corpus.dialogues)
        print(f"{lab.value}: {n}")
    return 0


def cmd_extract(args):
    cfg = effective_config(args, ["schema", "frame_dt", "min_event", "dot_threshold", "out"])
    cfg.update(turns=args.turns, labels=args.labels, rates=args.rates)
    schema = Schema(cfg["schema"])
    rates = None
    if schema is Schema.VGS:
        if not args.rates:
            raise UsageError("schema vgs needs per-utterance speech rates: pass --rates FILE "
                             "(e.g. rates.csv from 'simulate' or nuclei.csv from 'rate')")
        if not Path(args.rates).exists():
            raise UsageError(f"rates file not found: {args.rates}")
        rates = read_rates_table(Path(args.rates).read_text())
    dialogues = _load_dialogues(args.turns, args.labels)
    vectors, graphs = build_features(dialogues, schema, rates, cfg["frame_dt"], cfg["min_event"])
    meta = _meta("extract", cfg)
    out = Path(cfg["out"])
    _write(out / "features.csv", features_csv(vectors, _header_lines(meta)))
    for d, g in zip(dialogues, graphs):
        _write(out / "graphs" / f"{d.dialogue_id}.json", g.to_json(_meta=meta, dialogue_id=d.dialogue_id) + "\n")
        _write(out / "graphs" / f"{d.dialogue_id}.dot",
               "".join(f"// {h}\n" for h in _header_lines(meta)) + g.to_dot(d.dialogue_id, cfg["dot_threshold"]))
    print(f"{len(vectors)} dialogues, schema {schema.value}, {schema.width} features")
    return 0


def cmd_evaluate(args):
    cfg = effective_config(args, ["schema", "rounds", "k", "seed", "roc_rounds", "model", "out"])
    cfg["features"] = args.features
    vectors = read_features_csv(Path(args.features).read_text())
    schema = Schema(cfg["schema"])
    bad = [fv.dialogue_id for fv in vectors if fv.schema is not schema]
    if bad:
        raise ValidationError(f"feature file holds non-{schema.value} rows (e.g. {bad[0]}); pass --schema to match")
    X, y, ids = to_arrays(vectors)
    if cfg["model"] not in TRAINERS:
        raise UsageError(f"unknown model {cfg['model']!r}")
    if cfg["model"] == "adaboost":
        def trainer(Xt, yt):
            return train_real_adaboost(Xt, yt, rounds=cfg["rounds"])
    else:
        trainer = TRAINERS[cfg["model"]]

    seed = cfg["seed"]
    cv = compute_metrics(cross_validate(X, y, ids, trainer, k=cfg["k"], seed=seed))
    loo = compute_metrics(loocv(X, y, ids, trainer))
    roc, pooled = roc_smoothed(X, y, ids, trainer, rounds=cfg["roc_rounds"], k=cfg["k"], seed=seed)
    meta = _meta("evaluate", cfg)

    report = {"_meta": meta,
              "protocol": {"cv": f"stratified {cfg['k']}-fold", "macro": "mean over folds, undefined folds excluded",
                           "roc": f"{cfg['roc_rounds']} rounds of {cfg['k']}-fold pooled", "model": cfg["model"]}}
    report.update(cv.to_dict())
    report["Overall accuracy (LOOCV)"] = loo.overall_accuracy
    report["loocv_n"] = loo.n
    report["roc_auc"] = roc.auc
    report["roc_pooled_pairs"] = len(pooled)

    out = Path(cfg["out"])
    _write(out / "metrics.json", _json(report))
    _write(out / "roc.csv", roc.to_csv(_header_lines(meta)))
    if cfg["model"] == "adaboost":
        _write(out / "model.json", trainer(X, y).to_json(**meta) + "\n")
    print(f"LOOCV accuracy {loo.overall_accuracy:.3f}  CV accuracy {cv.overall_accuracy:.3f}  AUC {roc.auc:.3f}")
    return 0


def cmd_rate(args):
    cfg = effective_config(args, ["reference_wpm", "out"])
    paths = [Path(p) for p in args.wav or []]
    if args.wav_dir:
        paths += sorted(Path(args.wav_dir).glob("*.wav"))
    if not paths:
        raise UsageError("no WAV input: pass --wav FILE... or --wav-dir DIR")
    cfg.update(wav=[str(p) for p in paths], words=args.words, synth=args.synth)
    meta = _meta("rate", cfg)

    words = {}
    if args.words:
        with open(args.words) as fh:
            rows = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
        for row in csv.DictReader(rows):
            dur = row.get("duration_s")
            words[row["utterance_id"]] = (int(row["word_count"]), float(dur) if dur else None)
    synth = read_synth_durations(Path(args.synth).read_text()) if args.synth else {}

    failures = 0
    lines = ["utterance_id,n_nuclei,speaking_time_s,syll_per_min,warning"]
    syll, ratios = [], []
    for p in paths:
        uid = p.stem
        try:
            audio = read_wav(p)
            res = detect_syllable_nuclei(audio)
        except (AdtalkError, OSError) as exc:
            print(f"error: {p}: {exc}", file=sys.stderr)
            failures += 1
            continue
        warn = "; ".join(res.warnings)
        lines.append(f"{uid},{res.n_nuclei},{res.speaking_time_s:.3f},{res.syllables_per_min:.3f},{warn}")
        if uid in words and res.speaking_time_s > 0:
            wc, dur = words[uid]
            ratios.append(speech_rate_ratio(wc, dur or audio.duration_s, cfg["reference_wpm"], synth.get(uid)))
            syll.append(res.syllables_per_min)

    out = Path(cfg["out"])
    head = "".join(f"# {h}\n" for h in _header_lines(meta))
    _write(out / "nuclei.csv", head + "\n".join(lines) + "\n")
    rates_only = [float(ln.split(",")[3]) for ln in lines[1:]]
    summary = {"_meta": meta}
    if rates_only:
        rs = rate_summary(rates_only)
        summary["syll_per_min"] = {"mean": rs.mean, "variance": rs.variance, "n": rs.n,
                                   "variance_convention": "population (divide by n)"}
    if words:
        if len(syll) >= 3:
            try:
                pt = pearson_test(ratios, syll)
                summary["correlation"] = {"r": pt.r, "t": pt.t, "df": pt.df, "p": pt.p, "n": pt.n,
                                          "text": pt.format()}
                print(pt.format())
            except ValidationError as exc:
                summary["correlation"] = {"error": str(exc), "n": len(syll)}
        else:
            summary["correlation"] = {"error": "fewer than three utterances with word counts", "n": len(syll)}
    _write(out / "rate_summary.json", _json(summary))
    return 1 if failures else 0


def cmd_stats(args):
    cfg = effective_config(args, ["out"])
    cfg.update(turns=args.turns, labels=args.labels)
    dialogues = _load_dialogues(args.turns, args.labels)
    meta = _meta("stats", cfg)
    _write(Path(cfg["out"]) / "stats.csv", stats_csv(descriptive_stats(dialogues), _header_lines(meta)))
    return 0


# -------------------------------------------------------------------- parser


def build_parser():
    ap = argparse.ArgumentParser(prog="adtalk", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"adtalk {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, *extra):
        p.add_argument("--config", help="flat key=value file; flags override it")
        p.add_argument("--out", help="output directory (default: current directory)")
        for name in extra:
            if name == "seed":
                p.add_argument("--seed", type=int)
            elif name == "schema":
                p.add_argument("--schema", choices=["vgo", "vgs"])
            elif name == "frame_dt":
                p.add_argument("--frame-dt", dest="frame_dt", type=float, help="chain sampling step in s (0.1)")
            elif name == "min_event":
                p.add_argument("--min-event", dest="min_event", type=float, help="shortest event in s (0.05)")
            elif name == "rounds":
                p.add_argument("--rounds", type=int, help="boosting rounds (10)")
            elif name == "k":
                p.add_argument("--k", type=int, help="cross-validation folds (10)")
        return p

    p = common(sub.add_parser("simulate", help="write a synthetic two-class corpus"), "seed")
    p.add_argument("--n-ad", dest="n_ad", type=int)
    p.add_argument("--n-nonad", dest="n_nonad", type=int)
    p.add_argument("--target-s", dest="target_s", type=float, help="dialogue length in s (240)")
    p.add_argument("--profiles", help="class profile JSON (overrides the shipped defaults)")
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("extract", help="vocalisation-graph features from turns"),
               "schema", "frame_dt", "min_event")
    p.add_argument("--turns", required=True)
    p.add_argument("--labels")
    p.add_argument("--rates", help="per-utterance rates CSV (required for --schema vgs)")
    p.add_argument("--dot-threshold", dest="dot_threshold", type=float)
    p.set_defaults(func=cmd_extract)

    p = common(sub.add_parser("evaluate", help="10-fold CV, LOOCV and smoothed ROC"),
               "schema", "rounds", "k", "seed")
    p.add_argument("--features", required=True)
    p.add_argument("--roc-rounds", dest="roc_rounds", type=int)
    p.add_argument("--model", choices=sorted(TRAINERS))
    p.set_defaults(func=cmd_evaluate)

    p = common(sub.add_parser("rate", help="syllable-nuclei speech rate from WAV files"))
    p.add_argument("--wav", nargs="+")
    p.add_argument("--wav-dir")
    p.add_argument("--words", help="CSV utterance_id,word_count[,duration_s]")
    p.add_argument("--synth", help="CSV utterance_id,synth_duration_s")
    p.add_argument("--reference-wpm", dest="reference_wpm", type=float)
    p.set_defaults(func=cmd_rate)

    p = common(sub.add_parser("stats", help="descriptive turn statistics per class"))
    p.add_argument("--turns", required=True)
    p.add_argument("--labels", required=True)
    p.set_defaults(func=cmd_stats)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.cmd in STOCHASTIC:
            seed = args.seed
            if seed is None and args.config:
                seed = read_config(args.config).get("seed")
            if seed is None:
                raise UsageError(f"'{args.cmd}' is stochastic: --seed (or seed= in --config) is required")
        return args.func(args)
    except (AdtalkError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
