"""Command-line interface: ``e2ecc <command> [options]``.

Settings resolve as built-in defaults, then a JSON ``--config`` file, then
explicit flags. Output files go to ``--out``, which defaults to
``$E2ECC_OUTPUT_DIR`` or ``./e2ecc-out``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .codeio import read_matrix, write_matrix
from .codes import BUILTIN, builtin_H
from .gf2 import Code, independent_rows, standardize

OUTPUT_ENV = "E2ECC_OUTPUT_DIR"
log = logging.getLogger("e2ecc")


class UsageError(Exception):
    pass


def output_dir(flag) -> Path:
    path = Path(flag or os.environ.get(OUTPUT_ENV) or "e2ecc-out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_H(source: str) -> np.ndarray:
    """Parity-check matrix from a builtin name or a matrix file."""
    if source in BUILTIN:
        return builtin_H(source)
    path = Path(source)
    if not path.exists():
        raise UsageError(f"code {source!r} is neither a builtin ({', '.join(BUILTIN)}) nor a file")
    return read_matrix(path)


def load_code(source: str) -> Code:
    name = Path(source).stem if source not in BUILTIN else source
    return standardize(independent_rows(load_H(source)), name=name)[0]


def resolve(defaults: dict, config_path, flags: dict) -> dict:
    """defaults < config file < flags; config keys must be known."""
    out = dict(defaults)
    if config_path:
        data = json.loads(Path(config_path).read_text())
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(data) - set(defaults))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        out.update(data)
    out.update({k: v for k, v in flags.items() if v is not None and k in defaults})
    return out


# ---------------------------------------------------------------------------

def _train_defaults() -> dict:
    from .train import TrainConfig
    d = TrainConfig().to_dict()
    d["omega_freeze_epoch"] = None
    d.update(code="bch_31_16", omega_init="random")
    return d


def cmd_train(args) -> int:
    from .train import TrainConfig, fit, save_checkpoint

    flags = dict(vars(args))
    if args.ebno_range:
        flags["train_ebno_range_db"] = [float(v) for v in args.ebno_range.split(",")]
    cfg = resolve(_train_defaults(), args.config, flags)
    source, init = cfg.pop("code"), cfg.pop("omega_init")
    if init not in ("random", "code"):
        raise UsageError("omega_init must be 'random' or 'code'")
    code = load_code(source)
    cfg.update(n=code.n, k=code.k)
    tc = TrainConfig.from_dict(cfg)
    out = output_dir(args.out)
    omega0 = code.P if init == "code" else None
    ckpt = fit(tc, omega0=omega0, metrics_path=out / "metrics.csv")
    save_checkpoint(ckpt, out / "checkpoint.ckpt")
    write_matrix(ckpt.H, out / "learned_H.alist")
    (out / "config.json").write_text(json.dumps(dict(tc.to_dict(), code=source, omega_init=init),
                                                indent=2))
    print(f"wrote {out / 'checkpoint.ckpt'} (final loss {ckpt.loss:.5f})")
    return 0


def _eval_defaults() -> dict:
    return dict(code=None, checkpoint=None, decoder="bp", iters=5, ebno="4,5,6",
                min_codewords=100_000, min_error_frames=50, max_codewords=10_000_000,
                chunk=10_000, workers=1, seed=0, format="csv", output=None,
                zero_codeword=False, strict=False)


def make_decoders(spec: str, H, code_for_ml, iters: int, ckpt=None) -> list:
    from .evaluation import BPDecoder, HardDecoder, MLDecoder, NeuralDecoder

    out = []
    for item in spec.split(","):
        name, _, arg = item.strip().partition(":")
        if name == "bp":
            out.append(BPDecoder(H, int(arg) if arg else iters))
        elif name == "ml":
            out.append(MLDecoder(code_for_ml))
        elif name == "hard":
            out.append(HardDecoder())
        elif name == "neural":
            from .train import load_checkpoint
            c = load_checkpoint(arg) if arg else ckpt
            if c is None:
                raise UsageError("neural decoder needs a checkpoint (neural:PATH or --checkpoint)")
            out.append(NeuralDecoder.from_checkpoint(c))
        else:
            raise UsageError(f"unknown decoder {name!r}; use neural[:ckpt], bp[:L], ml, hard")
    return out


def cmd_eval(args) -> int:
    from .evaluation import (EvalConfig, LinearCode, emit_report, format_table, report_csv,
                             sweep)
    from .train import load_checkpoint

    cfg = resolve(_eval_defaults(), args.config, vars(args))
    ckpt = load_checkpoint(cfg["checkpoint"]) if cfg["checkpoint"] else None
    if cfg["code"]:
        src = cfg["code"]
        name = src if src in BUILTIN else Path(src).stem
        lc = LinearCode.from_parity_check(load_H(src), name=name)
    elif ckpt is not None:
        lc = LinearCode.from_code(ckpt.code())
    else:
        raise UsageError("eval needs --code or --checkpoint")
    decoders = make_decoders(cfg["decoder"], lc.H, lc, cfg["iters"], ckpt)
    ebno = [float(e) for e in str(cfg["ebno"]).split(",")]
    ec = EvalConfig(cfg["min_codewords"], cfg["min_error_frames"], cfg["max_codewords"],
                    cfg["chunk"], cfg["seed"], cfg["workers"], cfg["zero_codeword"])
    reports = sweep(decoders, lc, ebno, ec)
    for r in reports:
        for e in r.errors:
            print(f"error: {r.decoder}: {e}", file=sys.stderr)
    if cfg["output"]:
        emit_report(reports, cfg["output"], cfg["format"])
    elif cfg["format"] == "csv":
        sys.stdout.write(report_csv(reports))
    else:
        sys.stdout.write(format_table(reports))
    failed = any(r.errors for r in reports)
    if cfg["strict"] and any(r.censored for r in reports):
        print("censored points present (--strict)", file=sys.stderr)
        return 3
    return 1 if failed else 0


def cmd_export_code(args) -> int:
    from .train import load_checkpoint

    ckpt = load_checkpoint(args.checkpoint)
    out = output_dir(args.out)
    ext = ".alist" if args.format == "alist" else ".txt"
    code = ckpt.code()
    write_matrix(code.H, out / f"H{ext}")
    write_matrix(code.G, out / f"G{ext}")
    print(f"wrote {out / ('H' + ext)} and {out / ('G' + ext)} (n={code.n}, k={code.k})")
    return 0


def cmd_mask_dump(args) -> int:
    from . import autodiff as ad
    from .codeparam import build_mask
    from .train import load_checkpoint

    ckpt = load_checkpoint(args.checkpoint)
    out = output_dir(args.out)
    H = ckpt.H.astype(np.float64)
    with ad.no_grad():
        g = build_mask(H).data
        np.savetxt(out / "mask_g.csv", g, delimiter=",", fmt="%d")
        for l, m in enumerate(ckpt.model.attention_masks(H)):
            np.savetxt(out / f"mask_psi_layer{l}.csv", m.data, delimiter=",", fmt="%.6g")
        if ckpt.model.mask_mode != "trainable_mask_v2":
            counts = np.arange(0, int(g.max()) + 1, dtype=np.float64)
            rows = [counts] + [ckpt.model.psi(l, counts).data for l in range(ckpt.model.N)]
            header = "count," + ",".join(f"psi_layer{l}" for l in range(ckpt.model.N))
            np.savetxt(out / "psi_curve.csv", np.column_stack(rows), delimiter=",",
                       header=header, comments="", fmt="%.6g")
    print(f"wrote masks to {out}")
    return 0


def cmd_grad_check(args) -> int:
    from .gradcheck import run_suite

    results = run_suite(seed=args.seed, include_decoder=not args.quick)
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'}  {r.name:28s} {r.error:.3e} (tol {r.tolerance:g})")
    bad = [r for r in results if not r.ok]
    print(f"{len(results) - len(bad)}/{len(results)} checks passed")
    return 1 if bad else 0


def cmd_standardize(args) -> int:
    H = read_matrix(args.input)
    if args.drop_dependent:
        H = independent_rows(H)
    code, perm = standardize(H, name=Path(args.input).stem)
    out = output_dir(args.out)
    ext = ".alist" if args.format == "alist" else ".txt"
    write_matrix(code.H, out / f"H_std{ext}")
    write_matrix(code.G, out / f"G_std{ext}")
    (out / "perm.txt").write_text(" ".join(str(int(p)) for p in perm) + "\n")
    print(f"wrote standard form of {args.input} to {out} (n={code.n}, k={code.k})")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="e2ecc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", metavar="command", required=True)

    t = sub.add_parser("train", help="train code and decoder jointly")
    t.add_argument("--config", help="JSON file with training settings")
    t.add_argument("--code", help="builtin name or H file (sets n, k and optionally omega0)")
    t.add_argument("--omega-init", dest="omega_init", choices=("random", "code"))
    t.add_argument("--out")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--minibatches", dest="minibatches_per_epoch", type=int)
    t.add_argument("--batch-size", dest="batch_size", type=int)
    t.add_argument("--layers", dest="N", type=int)
    t.add_argument("--dim", dest="d", type=int)
    t.add_argument("--heads", dest="h", type=int)
    t.add_argument("--lr-start", dest="lr_start", type=float)
    t.add_argument("--lr-end", dest="lr_end", type=float)
    t.add_argument("--omega-freeze-epoch", dest="omega_freeze_epoch", type=int)
    t.add_argument("--omega-lr-scale", dest="omega_lr_scale", type=float)
    t.add_argument("--ebno-range", help="lo,hi training Eb/N0 in dB")
    t.add_argument("--message-mode", dest="message_mode", choices=("all_ones", "random"))
    t.add_argument("--encode-mode", dest="encode_mode", choices=("polar", "modulo_ste"))
    t.add_argument("--mask-mode", dest="mask_mode",
                   choices=("code_mask", "trainable_mask_v2", "code_mask_stop_gradient"))
    t.add_argument("--fixed-omega", dest="fixed_omega", action="store_true", default=None)
    t.add_argument("--dtype", choices=("float64", "float32"))
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="Monte-Carlo BER sweep")
    e.add_argument("--config", help="JSON file with evaluation settings")
    e.add_argument("--code", help="builtin name or H file")
    e.add_argument("--checkpoint", help="trained checkpoint (code and neural decoder)")
    e.add_argument("--decoder", help="comma list of neural[:ckpt], bp[:L], ml, hard")
    e.add_argument("--iters", type=int, help="BP iterations when not given as bp:L")
    e.add_argument("--ebno", help="comma list of Eb/N0 values in dB")
    e.add_argument("--min-codewords", dest="min_codewords", type=int)
    e.add_argument("--min-error-frames", dest="min_error_frames", type=int)
    e.add_argument("--max-codewords", dest="max_codewords", type=int)
    e.add_argument("--chunk", type=int)
    e.add_argument("--workers", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--format", choices=("csv", "pretty_table"))
    e.add_argument("--output", help="report path (default: stdout)")
    e.add_argument("--zero-codeword", dest="zero_codeword", action="store_true", default=None)
    e.add_argument("--strict", action="store_true", default=None,
                   help="exit nonzero if any point is censored")
    e.set_defaults(func=cmd_eval)

    x = sub.add_parser("export-code", help="write the learned H and G of a checkpoint")
    x.add_argument("checkpoint")
    x.add_argument("--out")
    x.add_argument("--format", choices=("alist", "dense"), default="alist")
    x.set_defaults(func=cmd_export_code)

    m = sub.add_parser("mask-dump", help="write g(H) and the learned masks as CSV")
    m.add_argument("checkpoint")
    m.add_argument("--out")
    m.set_defaults(func=cmd_mask_dump)

    g = sub.add_parser("grad-check", help="finite-difference gradient suite")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--quick", action="store_true", help="skip the full decoder check")
    g.set_defaults(func=cmd_grad_check)

    s = sub.add_parser("standardize", help="bring an H file to standard form")
    s.add_argument("input")
    s.add_argument("--out")
    s.add_argument("--format", choices=("alist", "dense"), default="alist")
    s.add_argument("--drop-dependent", action="store_true",
                   help="remove linearly dependent rows first")
    s.set_defaults(func=cmd_standardize)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ValueError, KeyError, OSError) as exc:
        print(f"e2ecc {args.command}: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
