"""Batch entry points: pool generation, MLP training, session evaluation,
audio rendering, agent simulation and serving.

Exit codes: 0 success, 1 domain error, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import SonolocError
from .metrics import flag_outliers, write_report_csv
from .mlp import TrainConfig, TrainingSet, init_mlp, save_mlp, train
from .session import generate_pool, load_pool, load_session, save_pool, score_trial
from .sonification import MappingConfig, ModelKind
from .synth import RenderConfig, instrument_for, render, write_wav
from . import agents, service
from .session import replay

_MODEL_ALIASES = {"beep": ModelKind.BEEP2}


def _parse_model(name: str) -> ModelKind:
    if name in _MODEL_ALIASES:
        return _MODEL_ALIASES[name]
    return ModelKind(name)


def _load_mapping_config(path) -> MappingConfig:
    if path is None:
        return MappingConfig()
    with open(path, "r", encoding="utf-8") as fh:
        return MappingConfig.from_dict(json.load(fh))


def cmd_pool_gen(args) -> int:
    pool = generate_pool(args.n, args.seed, size_range_mm=(args.size_min, args.size_max))
    save_pool(pool, args.out)
    print(f"wrote {len(pool.shapes)} shapes to {args.out}")
    return 0


def cmd_train(args) -> int:
    with open(args.data, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    data = TrainingSet(features=np.asarray(doc["features"]), targets=np.asarray(doc["targets"]))
    sizes = [data.features.shape[1], *args.hidden, data.targets.shape[1]]
    model = init_mlp(sizes, rng_seed=args.seed)
    cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size, rng_seed=args.seed)
    trained, history = train(model, data, cfg)
    save_mlp(trained, args.out)
    final = history[-1] if history else float("nan")
    print(f"trained {sizes} for {args.epochs} epochs, final loss {final:.3e}; wrote {args.out}")
    return 0


def cmd_eval(args) -> int:
    record = load_session(args.session)
    pool = load_pool(args.pool)
    rows = []
    for trial in record.trials:
        if trial.partial:
            continue
        report = score_trial(trial, pool)
        rows.append(
            {
                "session_id": record.session_id,
                "trial_id": trial.trial_id,
                "model": trial.model.value,
                "dice": report.dice,
                "area_ratio": report.area_ratio,
                "intercentroid_mm": report.intercentroid_mm,
                "crr": report.crr,
            }
        )
    rows.sort(key=lambda r: r["trial_id"])
    flag_outliers(rows)
    write_report_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_render(args) -> int:
    record = load_session(args.session)
    pool = load_pool(args.pool)
    trial = record.get_trial(args.trial)
    events = replay(record, pool)[trial.trial_id]
    duration = events[-1].t_ms / 1000.0 + 1.5 if events else 1.0
    buf = render(events, duration, RenderConfig(sample_rate_hz=args.sample_rate), instrument=instrument_for(trial.model))
    write_wav(buf, args.out)
    print(f"rendered {buf.duration_s:.2f} s to {args.out}")
    return 0


def cmd_agent(args) -> int:
    pool = load_pool(args.pool)
    cfg = _load_mapping_config(args.config)
    record = agents.run_agent_session(
        pool,
        policy=args.policy,
        model=_parse_model(args.model),
        n_trials=args.trials,
        rng_seed=args.seed,
        cfg=cfg,
        noise_mm=args.noise_mm,
    )
    from .session import save_session

    save_session(record, args.out)
    scored = [t.report.dice for t in record.trials if t.report is not None]
    mean = float(np.mean(scored)) if scored else float("nan")
    print(f"wrote {len(record.trials)} trials to {args.out} (mean dice {mean:.3f})")
    return 0


def cmd_serve(args) -> int:
    service.serve(
        args.bind,
        args.pool,
        config_path=args.config,
        out_dir=args.out_dir,
        record_audio=args.record_audio,
        trial_seed=args.trial_seed,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sonoloc")
    sub = parser.add_subparsers(dest="command", required=True)

    pool = sub.add_parser("pool", help="shape pool tools")
    pool_sub = pool.add_subparsers(dest="pool_command", required=True)
    gen = pool_sub.add_parser("gen", help="generate a shape pool")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--size-min", type=float, default=25.0)
    gen.add_argument("--size-max", type=float, default=50.0)
    gen.set_defaults(func=cmd_pool_gen)

    tr = sub.add_parser("train", help="train a mapping MLP from recorded examples")
    tr.add_argument("--data", required=True, help="JSON file with 'features' and 'targets' arrays")
    tr.add_argument("--out", required=True)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--hidden", type=int, nargs="*", default=[16, 16])
    tr.add_argument("--epochs", type=int, default=2000)
    tr.add_argument("--lr", type=float, default=0.05)
    tr.add_argument("--batch-size", type=int, default=None)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="score a session file into a CSV report")
    ev.add_argument("--session", required=True)
    ev.add_argument("--pool", required=True)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_eval)

    rd = sub.add_parser("render", help="render the audio a trial produced")
    rd.add_argument("--session", required=True)
    rd.add_argument("--pool", required=True)
    rd.add_argument("--trial", required=True)
    rd.add_argument("--out", required=True)
    rd.add_argument("--sample-rate", type=int, default=48000)
    rd.set_defaults(func=cmd_render)

    ag = sub.add_parser("agent", help="run scripted agents over a pool")
    ag.add_argument("--policy", choices=["seed-only", "margin-following"], required=True)
    ag.add_argument("--model", default="sine", help="beep|beep1|beep2|rhythm|synth|sine")
    ag.add_argument("--noise-mm", type=float, default=0.0)
    ag.add_argument("--trials", type=int, required=True)
    ag.add_argument("--pool", required=True)
    ag.add_argument("--seed", type=int, default=0)
    ag.add_argument("--out", required=True)
    ag.add_argument("--config", default=None)
    ag.set_defaults(func=cmd_agent)

    sv = sub.add_parser("serve", help="run the realtime WebSocket service")
    sv.add_argument("--bind", default="127.0.0.1:8765")
    sv.add_argument("--pool", required=True)
    sv.add_argument("--config", default=None)
    sv.add_argument("--out-dir", default="sessions")
    sv.add_argument("--record-audio", action="store_true")
    sv.add_argument("--trial-seed", type=int, default=0)
    sv.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SonolocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
