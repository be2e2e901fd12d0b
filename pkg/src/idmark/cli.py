"""Command-line interface.

Failures print ``error[<category>]: <message>`` on stderr and exit with a
category-specific nonzero code.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import codec, identity
from .chaos import derive_key, xor_apply
from .config import RunConfig, load_config
from .corpus import load_corpus, synth_corpus
from .errors import CollisionError, ConfigError, IdmarkError, InputError, PreconditionError
from .evaluation import evaluate_detection, evaluate_robustness
from .registry import Registry, RegistryRecord
from .verify import collision_check, detect
from .watermark import BinaryWatermark

log = logging.getLogger("idmark")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("configuration")
    g.add_argument("--config", type=Path, help="JSON run configuration")
    g.add_argument("--embeddings", type=Path, help="embedding file")
    g.add_argument("--model", type=Path, help="projection model file")
    g.add_argument("--registry", type=Path, help="registry file")
    g.add_argument("--seed", type=int, dest="master_seed", help="master seed")
    g.add_argument("--threshold", type=float, help="detection threshold on the matching rate")
    g.add_argument("--preset", choices=("easy", "regular", "hard"))
    g.add_argument("--swap-beta", type=float, dest="swap_beta")
    g.add_argument("--quant-step", type=float, dest="quant_step")
    g.add_argument("--redundancy", type=int)
    g.add_argument("--block-size", type=int, dest="block_size")
    g.add_argument("--assignment-seed", type=int, dest="assignment_seed")
    k = p.add_argument_group("cipher constants (also IDMARK_X0, IDMARK_R, IDMARK_P, IDMARK_Q)")
    k.add_argument("--x0", type=float)
    k.add_argument("--r", type=float)
    k.add_argument("--p", type=int)
    k.add_argument("--q", type=int)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _overrides(args) -> dict:
    out: dict = {}
    for key in ("master_seed", "threshold", "preset", "swap_beta"):
        if getattr(args, key, None) is not None:
            out[key] = getattr(args, key)
    codec_keys = ("quant_step", "redundancy", "block_size", "assignment_seed")
    codec_over = {k: getattr(args, k) for k in codec_keys if getattr(args, k, None) is not None}
    if codec_over:
        out["codec"] = codec_over
    chaos = {k: getattr(args, k) for k in ("x0", "r", "p", "q") if getattr(args, k, None) is not None}
    if chaos:
        out["chaos"] = chaos
    paths = {k: str(getattr(args, k)) for k in ("embeddings", "model", "registry", "corpus")
             if getattr(args, k, None) is not None}
    if paths:
        out["paths"] = paths
    return out


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def _model(cfg: RunConfig) -> identity.ProjectionModel:
    return identity.ProjectionModel.load(cfg.path("model"))


def _embedding_for(cfg: RunConfig, identity_id: str) -> identity.IdentityEmbedding:
    for e in identity.read_embeddings(cfg.path("embeddings")):
        if e.identity_id == identity_id:
            return e
    raise InputError(f"identity {identity_id!r} not found in {cfg.path('embeddings')}")


def _key(cfg: RunConfig, model: identity.ProjectionModel):
    return derive_key(cfg.chaotic_params(model.watermark_length))


def _images(args, cfg: RunConfig) -> list[np.ndarray]:
    corpus = cfg.path("corpus", required=False)
    if corpus is not None:
        images = load_corpus(corpus)
        if not images:
            raise InputError(f"no images found in {corpus}")
        return images
    return synth_corpus(args.synthetic, args.size, seed=cfg.master_seed)


# -- commands --------------------------------------------------------------------

def cmd_synth_embeddings(args, cfg):
    embs = identity.synthesize_embeddings(args.n, args.dim, args.samples, args.noise, cfg.master_seed)
    identity.write_embeddings(args.out, embs)
    _emit({"written": str(args.out), "identities": args.n, "records": len(embs), "dim": args.dim})


def cmd_fit(args, cfg):
    out = args.out or cfg.path("model")
    embs = identity.read_embeddings(cfg.path("embeddings"))
    length = args.length or cfg.watermark_length
    model = identity.fit_projection(embs, length, cfg.cutoff if args.cutoff is None else args.cutoff)
    model.save(out)
    reloaded = identity.ProjectionModel.load(out)
    gram = reloaded.components @ reloaded.components.T
    error = float(np.abs(gram - np.eye(length)).max())
    if error >= 1e-9:
        raise PreconditionError(f"reloaded components are not orthonormal (max error {error:.2e})")
    _emit({"written": str(out), "watermark_length": length, "embedding_dim": model.embedding_dim,
           "samples": len(embs), "orthonormality_error": error,
           "degenerate_dims": list(model.degenerate_dims)})


def cmd_protect(args, cfg):
    model = _model(cfg)
    key = _key(cfg, model)
    emb = _embedding_for(cfg, args.identity)
    m = identity.generate_watermark(model, emb, key)
    img = codec.load_image(args.image)
    try:
        marked = codec.embed(img, m, cfg.codec)
    except IdmarkError as exc:
        raise type(exc)(f"cannot protect {args.image}: {exc}") from None
    codec.save_image(args.out, marked)
    registry = Registry(cfg.path("registry"))
    created = registry.register(RegistryRecord(args.identity, xor_apply(m, key), str(args.out)))
    _emit({"identity": args.identity, "output": str(args.out), "registered": created,
           "psnr": codec.psnr(img, marked), "ssim": codec.ssim(img, marked)})


def _recover(args, cfg, model) -> BinaryWatermark:
    return codec.extract(codec.load_image(args.image), cfg.codec, model.watermark_length)


def cmd_extract(args, cfg):
    model = _model(cfg)
    m_rec = _recover(args, cfg, model)
    _emit({"encrypted": str(m_rec), "plain": str(xor_apply(m_rec, _key(cfg, model)))})


def cmd_verify(args, cfg):
    model = _model(cfg)
    key = _key(cfg, model)
    m_rec = _recover(args, cfg, model)
    m_content = identity.generate_watermark(model, _embedding_for(cfg, args.identity), key)
    report = detect(m_rec, m_content, cfg.threshold)
    _emit({"identity": args.identity, **report.to_dict()})


def cmd_trace(args, cfg):
    registry = Registry(cfg.path("registry"))
    if args.bits:
        query = BinaryWatermark.from_string(args.bits)
    else:
        model = _model(cfg)
        query = xor_apply(_recover(args, cfg, model), _key(cfg, model))
    matches = registry.trace(query, args.max_distance)
    _emit({"query": str(query), "max_distance": args.max_distance,
           "matches": [{"identity": i, "distance": d} for i, d in matches]})


def cmd_collision_check(args, cfg):
    model = _model(cfg)
    key = _key(cfg, model)
    marks: dict[str, set] = {}
    for e in identity.read_embeddings(cfg.path("embeddings")):
        marks.setdefault(e.identity_id, set()).add(identity.generate_watermark(model, e, key))
    report = collision_check(marks)
    _emit(report.to_dict())
    if not report.passed:
        a, b = report.colliding_pairs[0]
        raise CollisionError(a, b, f"<{len(report.colliding_pairs)} colliding pair(s)>")


def cmd_compact_registry(args, cfg):
    kept = Registry(cfg.path("registry")).compact()
    _emit({"registry": str(cfg.path("registry")), "records": kept})


def cmd_eval_robustness(args, cfg):
    images = _images(args, cfg)
    length = args.length or cfg.watermark_length
    result = evaluate_robustness(images, cfg, length, workers=args.workers)
    print(result.table())
    if args.json:
        Path(args.json).write_text(json.dumps(result.to_dict(cfg), indent=2) + "\n")


def cmd_eval_detection(args, cfg):
    images = _images(args, cfg)
    model = _model(cfg)
    embs = identity.read_embeddings(cfg.path("embeddings"))
    result = evaluate_detection(images, model, embs, cfg, args.samples, workers=args.workers)
    print(result.table())
    if args.json:
        Path(args.json).write_text(json.dumps(result.to_dict(cfg), indent=2) + "\n")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="idmark", description="Identity-perceptual proactive watermarking")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-embeddings", parents=[common], help="write synthetic identity embeddings")
    p.add_argument("--n", type=int, required=True, help="number of identities")
    p.add_argument("--dim", type=int, default=512)
    p.add_argument("--samples", type=int, default=1, help="samples per identity")
    p.add_argument("--noise", type=float, default=0.05, help="intra-identity noise norm")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth_embeddings)

    p = sub.add_parser("fit", parents=[common], help="fit the projection model")
    p.add_argument("--length", type=int, help="watermark length l")
    p.add_argument("--cutoff", type=float)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("protect", parents=[common], help="watermark an image and register it")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--identity", required=True)
    p.add_argument("--out", type=Path, required=True, help="output PNG")
    p.set_defaults(func=cmd_protect)

    p = sub.add_parser("extract", parents=[common], help="recover the watermark from an image")
    p.add_argument("--image", type=Path, required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("verify", parents=[common], help="check watermark/content consistency")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--identity", required=True, help="identity whose embedding describes the image content")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("trace", parents=[common], help="find registered identities near a watermark")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--image", type=Path)
    src.add_argument("--bits", help="plain watermark bit string")
    p.add_argument("--max-distance", type=int, default=16)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("collision-check", parents=[common], help="check watermarks of all embeddings")
    p.set_defaults(func=cmd_collision_check)

    p = sub.add_parser("compact-registry", parents=[common], help="rewrite the registry file")
    p.set_defaults(func=cmd_compact_registry)

    for name, func, helptext in (("eval-robustness", cmd_eval_robustness, "accuracy per manipulation"),
                                 ("eval-detection", cmd_eval_detection, "detection AUC")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--corpus", type=Path, help="directory of images (default: synthetic)")
        p.add_argument("--synthetic", type=int, default=20, help="synthetic corpus size")
        p.add_argument("--size", type=int, default=256, help="synthetic image side")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--json", type=Path, help="write a machine-readable summary here")
        if name == "eval-robustness":
            p.add_argument("--length", type=int, help="watermark length")
        else:
            p.add_argument("--samples", type=int, default=200, help="samples per class")
        p.set_defaults(func=func)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        args.func(args, cfg)
    except IdmarkError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return 9
    return 0


if __name__ == "__main__":
    sys.exit(main())
