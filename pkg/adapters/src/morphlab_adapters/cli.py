"""Adapter CLI: pretrained-model stages around the morphlab pipeline.

Exit codes: 0 success, 1 model-side failure (missing weights, landmark
failure), 2 usage or input error.
"""

from __future__ import annotations

import argparse
import os
import sys

from morphlab.errors import LatentFormatError, LatentShapeError, SchemaError

from .backends import BACKEND_NAMES, FRS_NAMES, get_backend
from .errors import AdapterError
from .ops import decode_latent, encode_image, encode_manifest, landmark_direction, score_pairs

EXIT_OK = 0
EXIT_MODEL = 1
EXIT_INPUT = 2


def _backend_for(args):
    name = args.backend or os.environ.get("MORPHLAB_ADAPTER_BACKEND", "torchscript")
    if name not in BACKEND_NAMES:
        raise SchemaError(f"unknown backend {name!r}; expected one of {BACKEND_NAMES}")
    return get_backend(name)


def cmd_encode(args) -> int:
    backend = _backend_for(args)
    if args.manifest:
        patch = encode_manifest(args.manifest, args.out_dir or ".", backend,
                                patch_path=args.patch)
        print(f"encode: {len(patch)} images -> {args.out_dir or '.'}")
    else:
        if not (args.image and args.out):
            raise SchemaError("encode needs --image with --out, or --manifest with --out-dir")
        encode_image(args.image, args.out, backend)
        print(f"encode: {args.image} -> {args.out} (18x512)")
    return EXIT_OK


def cmd_decode(args) -> int:
    backend = _backend_for(args)
    decode_latent(args.latent, args.out, backend, restore=args.restore)
    print(f"decode: {args.latent} -> {args.out} (1024x1024, restore={'on' if args.restore else 'off'})")
    return EXIT_OK


def cmd_direction(args) -> int:
    backend = _backend_for(args)
    direction = landmark_direction(args.image1, args.image2, args.out, backend)
    norm = float((direction.astype("float64") ** 2).sum() ** 0.5)
    print(f"direction: {args.image1} vs {args.image2} -> {args.out} (7x512, norm={norm:.6g})")
    return EXIT_OK


def cmd_score(args) -> int:
    backend = _backend_for(args)
    n_scores, n_impostors = score_pairs(
        args.manifest, args.frs, args.scores_out, args.impostors_out, backend,
        max_impostor_pairs=args.max_impostor_pairs,
    )
    print(
        f"score: frs={','.join(args.frs)} -> {n_scores} score rows ({args.scores_out}), "
        f"{n_impostors} impostor rows ({args.impostors_out})"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morphlab-adapters",
        description="Pretrained-model stages producing/consuming morphlab file formats.",
    )
    parser.add_argument(
        "--backend", choices=BACKEND_NAMES, default=None,
        help="inference backend (default: $MORPHLAB_ADAPTER_BACKEND or torchscript)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    encode_p = sub.add_parser("encode", help="image(s) -> (18,512) LTF latent(s)")
    encode_p.add_argument("--image", help="single aligned face image")
    encode_p.add_argument("--out", help="output LTF path for --image")
    encode_p.add_argument("--manifest", help="encode every image in a manifest")
    encode_p.add_argument("--out-dir", help="latent output directory for --manifest")
    encode_p.add_argument("--patch", help="manifest-patch JSON path (batch mode)")
    encode_p.set_defaults(func=cmd_encode)

    decode_p = sub.add_parser("decode", help="(18,512) LTF -> 1024x1024 PNG")
    decode_p.add_argument("--latent", required=True)
    decode_p.add_argument("--out", required=True)
    decode_p.add_argument("--restore", action="store_true",
                          help="apply the restoration network after synthesis")
    decode_p.set_defaults(func=cmd_decode)

    direction_p = sub.add_parser("direction", help="two images -> (7,512) transfer direction LTF")
    direction_p.add_argument("--image1", required=True)
    direction_p.add_argument("--image2", required=True)
    direction_p.add_argument("--out", required=True)
    direction_p.set_defaults(func=cmd_direction)

    score_p = sub.add_parser("score", help="manifest -> similarity + impostor CSVs")
    score_p.add_argument("--manifest", required=True)
    score_p.add_argument("--frs", action="append", choices=FRS_NAMES, required=True,
                         help="repeatable; each adds one FRS to the CSVs")
    score_p.add_argument("--scores-out", required=True)
    score_p.add_argument("--impostors-out", required=True)
    score_p.add_argument("--max-impostor-pairs", type=int, default=500)
    score_p.set_defaults(func=cmd_score)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (SchemaError, LatentFormatError, LatentShapeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
