"""Command-line entry point: ``lowres-mimo {sweep,conditional-ber,dmin-stats,decode}``.

Every flag can also be given in a flat ``key=value`` file passed with
``--config``; keys are flag names without the leading dashes (``snr-db`` or
``snr_db``). Values on the command line override the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import harness
from .codebook import build_codebook, dump_codebook, load_codebook, parse_digits
from .detectors import (
    emld,
    mdd,
    partition_users,
    sic_decode,
    wmdd,
    zf_detect,
)
from .effective_channel import exact_error_probs, transition_tensor
from .model import db_to_linear, make_constellation, make_quantizer, to_real_channel
from .training import ESTIMATORS


def _int_list(text):
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


def _float_list(text):
    return [float(v) for v in str(text).replace(" ", "").split(",") if v]


def _str_list(text):
    return [v for v in str(text).replace(" ", "").split(",") if v]


def _bool(text):
    if isinstance(text, bool):
        return text
    val = str(text).strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off", ""):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _add_model_flags(p):
    p.add_argument("--k", type=int, default=2, help="number of users K")
    p.add_argument("--nr", type=int, default=16, help="receive antennas Nr")
    p.add_argument("--p", type=int, default=2, choices=(2, 4), help="ADC levels")
    p.add_argument("--mod", default="qpsk", choices=("bpsk", "qpsk", "16qam"))
    p.add_argument("--snr-db", type=_float_list, default=[0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
                   help="comma-separated SNR grid in dB")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--workers", type=int, default=1, help="worker threads")
    p.add_argument("--config", help="key=value configuration file")


def _add_experiment_flags(p):
    p.add_argument("--detectors", type=_str_list, default=["mdd", "emld", "wmdd", "zf"])
    p.add_argument("--training", default="perfect", choices=harness.TRAINING_MODES)
    p.add_argument("--t", type=int, default=None,
                   help="training repetitions per codeword (default 4 implicit, 25 explicit)")
    p.add_argument("--tt", type=int, default=32, help="pilot slots for explicit training")
    p.add_argument("--symmetry", type=_bool, nargs="?", const=True, default=False)
    p.add_argument("--estimator", default="genie_noise", choices=ESTIMATORS)
    p.add_argument("--sic-k1", type=int, default=None)
    p.add_argument("--tc", type=int, default=1000, help="coherence block length T_c")
    p.add_argument("--channel-draws", type=int, default=100)
    p.add_argument("--noise-trials", type=int, default=1000)
    p.add_argument("--out", default="-", help="output path ('-' for stdout)")
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.add_argument("--allow-overbudget", type=_bool, nargs="?", const=True, default=False)
    p.add_argument("--with-ser", type=_bool, nargs="?", const=True, default=False,
                   help="append per-user symbol error columns")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lowres-mimo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="BER versus SNR")
    _add_model_flags(p)
    _add_experiment_flags(p)

    p = sub.add_parser("conditional-ber", help="BER per d_min bin")
    _add_model_flags(p)
    _add_experiment_flags(p)
    p.add_argument("--dmin-bins", type=_int_list, default=[1, 2, 3])
    p.add_argument("--draw-budget", type=int, default=10000)

    p = sub.add_parser("dmin-stats", help="Monte Carlo d_min distribution")
    _add_model_flags(p)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--out", default="-")

    p = sub.add_parser("decode", help="decode one observation (debugging)")
    _add_model_flags(p)
    p.add_argument("--obs", required=True, help="observation as a digit string")
    p.add_argument("--detectors", type=_str_list, default=["mdd", "emld", "wmdd", "zf"])
    p.add_argument("--sic-k1", type=int, default=None)
    p.add_argument("--draw", type=int, default=0, help="channel draw id")
    p.add_argument("--codebook", help="decode against a dumped codebook (MDD only)")
    p.add_argument("--codebook-dump", nargs="?", const="-", default=None,
                   help="write the channel's codebook to this path ('-' for stdout)")
    return parser


def read_config_file(path) -> dict:
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        file_values = read_config_file(args.config)
        by_dest = {a.dest: a for a in subparser._actions}
        unknown = set(file_values) - set(by_dest)
        if unknown:
            parser.error(f"unknown keys in {args.config}: {sorted(unknown)}")
        typed = {}
        for key, raw in file_values.items():
            action = by_dest[key]
            conv = action.type or (lambda v: v)
            typed[key] = conv(raw)
        subparser.set_defaults(**typed)
        args = parser.parse_args(argv)
    return args


def config_from_args(args) -> harness.ExperimentConfig:
    values = dict(
        k_users=args.k, n_rx=args.nr, adc_levels=args.p, modulation=args.mod,
        snr_db=tuple(args.snr_db), master_seed=args.seed, workers=args.workers,
    )
    if hasattr(args, "training"):
        values.update(
            detectors=tuple(args.detectors), training=args.training, t_repeat=args.t,
            pilot_slots=args.tt, symmetry=args.symmetry, estimator=args.estimator,
            sic_k1=args.sic_k1, coherence=args.tc, channel_draws=args.channel_draws,
            noise_trials=args.noise_trials, allow_overbudget=args.allow_overbudget,
        )
    if hasattr(args, "dmin_bins"):
        values.update(dmin_bins=tuple(args.dmin_bins), draw_budget=args.draw_budget)
    return harness.config_from_dict(values)


def _meta(cfg):
    overhead = cfg.training_overhead()
    return {
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(cfg).items()},
        "training_overhead": overhead,
        "data_fraction": (cfg.coherence - overhead) / cfg.coherence,
    }


def _emit(rows, args, cfg):
    out = sys.stdout if args.out == "-" else args.out
    harness.emit_results(rows, args.format, out, args.with_ser, _meta(cfg))


def cmd_sweep(args):
    cfg = config_from_args(args).validate()
    _emit(harness.run_ber_sweep(cfg), args, cfg)


def cmd_conditional(args):
    cfg = config_from_args(args).validate()
    result = harness.run_conditional_ber(cfg)
    for d, rate in result.hit_rates.items():
        print(f"# d_min={d}: hit rate {rate:.4f}, {result.accepted[d]} draws", file=sys.stderr)
    _emit(result.rows, args, cfg)


def cmd_dmin(args):
    cfg = config_from_args(args)
    stats = harness.run_dmin_stats(cfg, args.samples)
    doc = {"samples": stats.samples, "mean": stats.mean,
           "histogram": {str(k): v for k, v in stats.histogram.items()}}
    text = json.dumps(doc, indent=1) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)


def cmd_decode(args):
    r = parse_digits(args.obs)
    if args.codebook:
        with open(args.codebook) as fh:
            cb = load_codebook(fh)
        res = mdd(r, cb)
        print(f"mdd: index={res.index} messages={list(res.messages)} score={res.score:g} "
              f"ties={res.tie_count}")
        return
    cfg = config_from_args(args)
    snr = db_to_linear(cfg.snr_db[0])
    c = make_constellation(cfg.modulation, snr)
    q = make_quantizer(cfg.adc_levels, snr)
    h = to_real_channel(harness.draw_channel(cfg, "sweep", args.draw))
    if len(r) != h.shape[0]:
        raise SystemExit(f"observation has {len(r)} symbols, expected N={h.shape[0]}")
    if args.codebook_dump is not None:
        cb = build_codebook(h, c, q)
        if args.codebook_dump == "-":
            dump_codebook(cb, sys.stdout)
        else:
            with open(args.codebook_dump, "w") as fh:
                dump_codebook(cb, fh)
    if args.sic_k1 is not None:
        part = partition_users(h, args.sic_k1)
        for det in args.detectors:
            if det == "zf":
                continue
            res = sic_decode(r, h, c, q, part, det)
            print(f"sic-{det}: index={res.index} messages={list(res.messages)} "
                  f"evaluations={res.evaluations}")
        return
    cb = build_codebook(h, c, q)
    tensor = transition_tensor(h, c, q)
    eps = exact_error_probs(tensor, cb).with_floor(np.finfo(float).tiny)
    decoders = {
        "mdd": lambda: mdd(r, cb),
        "wmdd": lambda: wmdd(r, cb, eps),
        "emld": lambda: emld(r, tensor),
        "zf": lambda: zf_detect(r, h, q, c),
    }
    for det in args.detectors:
        if det not in decoders:
            raise SystemExit(f"unknown detector {det!r}")
        res = decoders[det]()
        print(f"{det}: index={res.index} messages={list(res.messages)} score={res.score:.6g} "
              f"ties={res.tie_count}")


COMMANDS = {"sweep": cmd_sweep, "conditional-ber": cmd_conditional, "dmin-stats": cmd_dmin,
            "decode": cmd_decode}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except harness.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
