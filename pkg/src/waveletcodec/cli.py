"""Command-line front end: encode, decode, metrics, sweep, bdrate.

Classical mode is fully self-contained; neural mode loads a weight
manifest with --model. The ablation flags (--wavelet, --slices,
--no-weconv) configure the classical codec directly and, in neural
mode, are cross-checked against the manifest so a mislabeled experiment
fails loudly instead of silently measuring the wrong configuration.
"""

from __future__ import annotations

import argparse
import os
import sys

from .bdrate import bd_rate
from .container import decode_file, encode_file, load_image
from .errors import CodecError, ModelMismatch, PreconditionViolation
from .graph import CodecGraph
from .manifest import load_manifest
from .metrics import ms_ssim, psnr
from .sweep import SweepConfig, curve_from_rows, rd_sweep, read_csv, \
    write_csv
from .wavelets import WaveletKind

_WAVELETS = {"haar": WaveletKind.HAAR, "53": WaveletKind.CDF53,
             "97": WaveletKind.CDF97}


def _add_codec_flags(p: argparse.ArgumentParser):
    p.add_argument("--mode", choices=("neural", "classical"), default=None,
                   help="codec mode; defaults to neural when --model is "
                        "given, classical otherwise")
    p.add_argument("--model", default=None,
                   help="weight manifest for neural mode")
    p.add_argument("--wavelet", choices=sorted(_WAVELETS), default=None,
                   help="wavelet family (classical default: 53)")
    p.add_argument("--qstep", type=float, default=1.0,
                   help="classical quantization step (default 1.0)")
    p.add_argument("--levels", type=int, default=3,
                   help="classical decomposition levels (default 3)")
    p.add_argument("--slices", type=int, choices=(5, 10), default=None,
                   help="assert the manifest's latent slice count")
    p.add_argument("--no-weconv", action="store_true",
                   help="assert the manifest is the no-WeConv baseline")


def _resolve_mode(args) -> str:
    if args.mode is not None:
        return args.mode
    return "neural" if args.model else "classical"


def _check_manifest_flags(hp, slices, no_weconv, wavelet):
    if slices is not None and hp.k != slices:
        raise ModelMismatch(f"--slices {slices} but the manifest "
                            f"uses {hp.k}")
    if no_weconv and hp.weconv:
        raise ModelMismatch("--no-weconv given but the manifest enables "
                            "the wavelet conv layers")
    if wavelet is not None and _WAVELETS[wavelet] != hp.wavelet:
        raise ModelMismatch(f"--wavelet {wavelet} but the manifest "
                            f"uses {WaveletKind(hp.wavelet).name}")


def _load_model(args) -> CodecGraph | None:
    if args.model is None:
        return None
    model = CodecGraph(load_manifest(args.model))
    _check_manifest_flags(model.hp, args.slices, args.no_weconv,
                          args.wavelet)
    return model


def _cmd_encode(args) -> int:
    mode = _resolve_mode(args)
    model = _load_model(args)
    if mode == "neural" and model is None:
        raise PreconditionViolation("neural mode needs --model")
    options = {"mode": mode}
    if mode == "classical":
        options["qstep"] = args.qstep
        options["levels"] = args.levels
        options["wavelet"] = _WAVELETS[args.wavelet or "53"]
    report = encode_file(args.image, args.bitstream, model, **options)
    print(f"bpp={report.bpp:.6f}")
    print(f"est_bits={report.est_bits:.1f}")
    print(f"actual_bits={report.actual_bits}")
    return 0


def _cmd_decode(args) -> int:
    model = None
    if args.model is not None:
        model = CodecGraph(load_manifest(args.model))
    decode_file(args.bitstream, args.image, model)
    print(f"wrote {args.image}")
    return 0


def _cmd_metrics(args) -> int:
    ref = load_image(args.reference)
    test = load_image(args.test)
    print(f"psnr_db={psnr(ref, test):.4f}")
    print(f"msssim={ms_ssim(ref, test):.6f}")
    return 0


def _cmd_sweep(args) -> int:
    mode = _resolve_mode(args)
    if mode == "neural":
        models = tuple(CodecGraph(load_manifest(p)) for p in args.model)
        if not models:
            raise PreconditionViolation("neural sweeps need --model, one "
                                        "per rate point")
        for model in models:
            _check_manifest_flags(model.hp, args.slices, args.no_weconv,
                                  args.wavelet)
        cfg = SweepConfig(name=args.name, mode="neural", models=models)
    else:
        qsteps = tuple(float(q) for q in args.qsteps.split(","))
        cfg = SweepConfig(name=args.name, mode="classical",
                          wavelet=_WAVELETS[args.wavelet or "53"],
                          levels=args.levels, qsteps=qsteps)
    rows, summary = rd_sweep(args.image_dir, [cfg])
    if args.append and os.path.exists(args.out):
        rows = read_csv(args.out) + rows
    write_csv(rows, args.out)
    entry = summary["configs"][args.name]
    print(f"rows={len(rows)} images={len(summary['images'])}")
    print(f"max_audit={entry['max_audit']:.6f}")
    for label, point in zip((lbl for lbl, _, _ in cfg.points()),
                            entry["curve"]):
        print(f"{args.name}:{label} bpp={point.bpp:.4f} "
              f"psnr_db={point.psnr_db:.3f} msssim={point.msssim:.5f}")
    return 0


def _cmd_bdrate(args) -> int:
    rows = read_csv(args.table)
    delta = bd_rate(curve_from_rows(rows, args.reference),
                    curve_from_rows(rows, args.test))
    print(f"bd_rate_percent={delta:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavcodec",
        description="Wavelet image codec: neural (with a weight manifest) "
                    "or self-contained classical mode.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="image file -> bitstream")
    p.add_argument("image")
    p.add_argument("bitstream")
    _add_codec_flags(p)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="bitstream -> image file")
    p.add_argument("bitstream")
    p.add_argument("image")
    p.add_argument("--model", default=None,
                   help="weight manifest (neural bitstreams)")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("metrics", help="PSNR / MS-SSIM between two images")
    p.add_argument("reference")
    p.add_argument("test")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("sweep",
                       help="rate-distortion sweep over an image dir")
    p.add_argument("image_dir")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--name", default="run", help="configuration name")
    p.add_argument("--qsteps", default="1,2,4,8,16,32",
                   help="comma-separated classical qsteps")
    p.add_argument("--mode", choices=("neural", "classical"), default=None)
    p.add_argument("--model", action="append", default=[],
                   help="repeatable: one manifest per neural rate point")
    p.add_argument("--wavelet", choices=sorted(_WAVELETS), default=None)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--slices", type=int, choices=(5, 10), default=None)
    p.add_argument("--no-weconv", action="store_true")
    p.add_argument("--append", action="store_true",
                   help="append to an existing sweep table")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("bdrate",
                       help="BD-rate between two configs in a sweep CSV")
    p.add_argument("table")
    p.add_argument("reference")
    p.add_argument("test")
    p.set_defaults(func=_cmd_bdrate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CodecError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
