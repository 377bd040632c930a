"""Command-line entry point: one subcommand per pipeline stage.

Subcommands: ingest, sanity, train, eval, cka, identify, transfer, report,
synth. Every run appends a JSON provenance line (command, config digest,
seed, versions) to <out>/runlog.jsonl. Exit codes: 0 success, 2 validation
failure or missing prerequisite artifact (the message names it), 64 usage
errors. The VL_SEED environment variable overrides the configured seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .binfmt import FormatError
from .config import ConfigError, PipelineConfig, load_config
from .corpus import (
    LabelSpace,
    RecordError,
    SplitSet,
    bucket_others,
    dedupe,
    ingest,
    load_corpus,
    manifest,
    save_corpus,
    split,
    truncate,
)
from .evalmetrics import evaluate
from .features import fit_vocabulary, transform_counts, transform_tfidf
from .identify import alias_report, build_style_sets
from .nnet import load_model, predict, save_model, train_gradient_model, train_nb
from .repspace import LayerWeights, cka_profile, load_embeddings, save_embeddings, select_layers
from .stylometry import flag_identical_vendors, vendor_similarity_profile
from .synth import (
    make_before_after_tensors,
    make_closed_set_records,
    make_identify_fixture,
    make_transfer_fixture,
    make_zero_shot_records,
)
from .transfer import run_lr_benchmark

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_USAGE = 64


class MissingArtifact(FileNotFoundError):
    def __init__(self, path, hint: str):
        super().__init__(f"missing artifact: {path} ({hint})")
        self.path = Path(path)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 64, not argparse's default 2
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _log_run(config: PipelineConfig, command: str) -> None:
    line = {
        "command": command,
        "config_digest": config.digest(),
        "seed": config.seed,
        "versions": {
            "vendorlens": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
    }
    with (config.out() / "runlog.jsonl").open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(line, sort_keys=True) + "\n")


def _need(path: Path, hint: str) -> Path:
    if not Path(path).exists():
        raise MissingArtifact(path, hint)
    return Path(path)


def _write_text(path: Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _load_pipeline_corpus(config: PipelineConfig):
    out = config.out()
    corpus = load_corpus(_need(out / "corpus.proc.jsonl", "run `vendorlens ingest` first"))
    labels = LabelSpace.from_dict(
        json.loads(_need(out / "labels.json", "run `vendorlens ingest` first").read_text())
    )
    split_doc = json.loads(
        _need(out / "split.json", "run `vendorlens ingest` first").read_text()
    )
    splits = SplitSet(
        train=tuple(split_doc["train"]),
        val=tuple(split_doc["val"]),
        test=tuple(split_doc["test"]),
        ratios=tuple(split_doc["ratios"]),
        seed=int(split_doc["seed"]),
    )
    return corpus, labels, splits


def cmd_ingest(config: PipelineConfig) -> int:
    if not config.corpus_path:
        raise ConfigError("corpus_path is not set (config key corpus_path or --corpus)")
    raw = ingest(_need(config.corpus_path, "input corpus"), format=config.corpus_format)
    processed = truncate(dedupe(raw), limit=config.truncation_limit)
    labels = bucket_others(processed, min_ads=config.min_ads)
    splits = split(processed, ratios=config.split_ratios, seed=config.seed, label_space=labels)
    out = config.out()
    save_corpus(processed, out / "corpus.proc.jsonl")
    _write_text(out / "manifest.json", json.dumps(manifest(processed, labels), sort_keys=True) + "\n")
    _write_text(out / "labels.json", json.dumps(labels.to_dict(), sort_keys=True) + "\n")
    _write_text(
        out / "split.json",
        json.dumps(
            {
                "train": list(splits.train),
                "val": list(splits.val),
                "test": list(splits.test),
                "ratios": list(splits.ratios),
                "seed": splits.seed,
            },
            sort_keys=True,
        )
        + "\n",
    )
    print(
        f"ingested {len(raw)} records -> {len(processed)} ads, "
        f"{labels.n_classes} classes, splits {len(splits.train)}/{len(splits.val)}/{len(splits.test)}"
    )
    return EXIT_OK


def cmd_sanity(config: PipelineConfig) -> int:
    corpus, _, _ = _load_pipeline_corpus(config)
    out = config.out()
    lines = ["vendor,market_pair,mean_avg_similarity"]
    by_vendor_market: dict[str, dict[str, int]] = {}
    for ad in corpus.ads:
        by_vendor_market.setdefault(ad.vendor_norm, {}).setdefault(ad.market, 0)
        by_vendor_market[ad.vendor_norm][ad.market] += 1
    for vendor in sorted(by_vendor_market):
        markets = sorted(by_vendor_market[vendor])
        for i, mx in enumerate(markets):
            if by_vendor_market[vendor][mx] >= 2:
                value = vendor_similarity_profile(
                    corpus, vendor, mx, mx, cap=config.profile_cap, seed=config.seed
                )
                lines.append(f"{vendor},{mx},{value:.6f}")
            for my in markets[i + 1 :]:
                value = vendor_similarity_profile(
                    corpus, vendor, mx, my, cap=config.profile_cap, seed=config.seed
                )
                lines.append(f"{vendor},{mx}|{my},{value:.6f}")
    _write_text(out / "sanity.csv", "\n".join(lines) + "\n")
    flagged = flag_identical_vendors(corpus, cap=config.profile_cap, seed=config.seed)
    _write_text(out / "identical_vendors.txt", "".join(f"{v}\n" for v in flagged))
    print(f"sanity rows: {len(lines) - 1}; identical cross-market vendors: {len(flagged)}")
    return EXIT_OK


def _featurize(config: PipelineConfig, corpus, splits):
    texts = [ad.merged_text for ad in corpus.ads]
    train_texts = [texts[i] for i in splits.train]
    vocab = fit_vocabulary(
        train_texts,
        ngram_range=config.ngram_range,
        min_df=config.min_df,
        case_mode=config.case_mode,
    )
    return texts, vocab


def cmd_train(config: PipelineConfig) -> int:
    corpus, labels, splits = _load_pipeline_corpus(config)
    kind = config.classifier_kind
    if kind not in ("nb", "softmax", "mlp"):
        raise ConfigError(
            f"cmd_train supports nb|softmax|mlp (got {kind!r}); sequence transfer models "
            "are trained by `vendorlens transfer`"
        )
    out = config.out()
    texts, vocab = _featurize(config, corpus, splits)
    y = labels.labels(corpus)
    tr, va, te = list(splits.train), list(splits.val), list(splits.test)
    if kind == "nb":
        X = transform_counts(vocab, texts)
        model = train_nb(X.csr[tr], y[tr], labels.n_classes, alpha=config.nb_alpha)
    else:
        X = transform_tfidf(vocab, texts)
        val_data = (X.csr[va], y[va]) if va else None
        model = train_gradient_model(
            kind,
            (X.csr[tr], y[tr]),
            config.train,
            labels.n_classes,
            arch={"hidden": config.hidden},
            val_data=val_data,
        )
    model.meta["label_space"] = labels.to_dict()
    vocab.save(out / "vocab.json")
    save_model(model, out / "model.vlmodel")
    eval_idx = te or tr
    pred, _ = predict(model, X.csr[eval_idx])
    report = evaluate(y[eval_idx], pred, labels.n_classes)
    _write_text(out / "eval_test.json", report.to_json() + "\n")
    print(report.to_table())
    return EXIT_OK


def cmd_eval(config: PipelineConfig, which: str = "test") -> int:
    corpus, labels, splits = _load_pipeline_corpus(config)
    out = config.out()
    model = load_model(_need(out / "model.vlmodel", "run `vendorlens train` first"))
    from .features import Vocabulary

    vocab = Vocabulary.load(_need(out / "vocab.json", "run `vendorlens train` first"))
    texts = [ad.merged_text for ad in corpus.ads]
    idx = list(splits.parts()[which])
    if not idx:
        raise ConfigError(f"split {which!r} is empty")
    X = transform_counts(vocab, texts) if model.kind == "nb" else transform_tfidf(vocab, texts)
    y = labels.labels(corpus)
    pred, _ = predict(model, X.csr[idx])
    report = evaluate(y[idx], pred, labels.n_classes)
    _write_text(out / f"eval_{which}.json", report.to_json() + "\n")
    print(report.to_table())
    return EXIT_OK


def cmd_cka(config: PipelineConfig) -> int:
    if not config.emb_before or not config.emb_after:
        raise ConfigError("cka needs emb_before and emb_after paths in the config")
    before = load_embeddings(_need(config.emb_before, "before-checkpoint VLEMB1 dump"))
    after = load_embeddings(_need(config.emb_after, "after-checkpoint VLEMB1 dump"))
    profile = cka_profile(before, after)
    out = config.out()
    lines = ["layer,cka_similarity,cka_distance"]
    for layer in range(profile.n_layers):
        lines.append(
            f"{layer},{profile.similarity[layer]:.9f},{profile.distance[layer]:.9f}"
        )
    _write_text(out / "cka_profile.csv", "\n".join(lines) + "\n")
    _write_text(
        out / "cka_profile.json",
        json.dumps(
            {"similarity": list(profile.similarity), "distance": list(profile.distance)},
            sort_keys=True,
        )
        + "\n",
    )
    k = min(config.layer_k, profile.n_layers)
    weights = select_layers(profile, k=k)
    _write_text(
        out / "layer_weights.json",
        json.dumps({"k": k, "weights": weights.weights.tolist()}, sort_keys=True) + "\n",
    )
    print(f"cka profile over {profile.n_layers} layers; top-{k} layer weights written")
    return EXIT_OK


def _style_weights(config: PipelineConfig, n_layers: int) -> LayerWeights:
    candidate = config.out() / "layer_weights.json"
    if candidate.exists():
        doc = json.loads(candidate.read_text())
        w = np.asarray(doc["weights"], dtype=np.float64)
        if w.shape == (n_layers,):
            return LayerWeights(w)
    return LayerWeights(np.full(n_layers, 1.0 / n_layers))


def cmd_identify(config: PipelineConfig) -> int:
    corpus, _, _ = _load_pipeline_corpus(config)
    if not config.emb_style:
        raise ConfigError("identify needs emb_style (cls-mode VLEMB1 dump) in the config")
    tensor = load_embeddings(_need(config.emb_style, "style VLEMB1 dump"))
    weights = _style_weights(config, tensor.n_layers)
    style_sets = build_style_sets(
        corpus, tensor, weights, cap=config.pair_cap, seed=config.seed
    )
    artifacts = alias_report(
        corpus,
        style_sets,
        sim_norm_threshold=config.sim_norm_threshold,
        name_sim_threshold=config.name_sim_threshold,
    )
    out = config.out()
    names = {
        "aliases": "aliases.csv",
        "ranked": "ranked.csv",
        "migrants": "migrants.csv",
        "scatter": "scatter.csv",
        "name_pairs": "name_pairs.csv",
    }
    for key, filename in names.items():
        _write_text(out / filename, artifacts[key])
    cache = {
        "config_digest": config.digest(),
        "n_vendors": len(style_sets),
        "files": sorted(names.values()),
    }
    _write_text(out / "identify_cache.json", json.dumps(cache, sort_keys=True) + "\n")
    n_alias_rows = max(artifacts["aliases"].count("\n") - 2, 0)
    print(f"identify: {len(style_sets)} vendors, {n_alias_rows} alias pairs above threshold")
    return EXIT_OK


def cmd_transfer(config: PipelineConfig) -> int:
    corpus, labels, splits = _load_pipeline_corpus(config)
    if not config.emb_token:
        raise ConfigError("transfer needs emb_token (token-mode VLEMB1 dump) in the config")
    tensor = load_embeddings(_need(config.emb_token, "token VLEMB1 dump"))
    if tensor.ad_ids != tuple(corpus.ad_ids()):
        raise ConfigError("token tensor ad_ids do not align with the processed corpus")
    source_model = source_labels = source_features = None
    if config.source_model and config.source_vocab and config.source_labels:
        from .features import Vocabulary

        source_model = load_model(_need(config.source_model, "source model"))
        source_labels = LabelSpace.from_dict(
            json.loads(_need(config.source_labels, "source label space").read_text())
        )
        src_vocab = Vocabulary.load(_need(config.source_vocab, "source vocabulary"))
        texts = [ad.merged_text for ad in corpus.ads]
        source_features = (
            transform_counts(src_vocab, texts).csr
            if source_model.kind == "nb"
            else transform_tfidf(src_vocab, texts).csr
        )
    y = labels.labels(corpus)
    run = run_lr_benchmark(
        corpus,
        y,
        labels.n_classes,
        splits,
        tensor,
        config.train,
        config.bigru,
        source_model=source_model,
        source_label_space=source_labels,
        source_target_features=source_features,
        static_dim=config.transfer_static_dim,
        max_len=config.transfer_max_len,
        source_tag=config.source_model or "",
        target_tag=tensor.checkpoint_tag,
    )
    out = config.out()
    _write_text(out / "benchmark.csv", run.to_csv())
    _write_text(out / "benchmark.json", run.to_json() + "\n")
    print(run.to_csv().rstrip("\n"))
    return EXIT_OK


def cmd_report(config: PipelineConfig) -> int:
    out = config.out()
    cache_path = out / "identify_cache.json"
    if not cache_path.exists():
        raise MissingArtifact(cache_path, "run `vendorlens identify` first")
    cache = json.loads(cache_path.read_text())
    sections = [f"# vendor linkage report\n\nconfig digest: {cache['config_digest']}\n"]
    aliases = (out / "aliases.csv").read_text(encoding="utf-8").splitlines()
    migrants = (out / "migrants.csv").read_text(encoding="utf-8").splitlines()
    sections.append(f"## alias candidates ({max(len(aliases) - 2, 0)})\n")
    sections.extend(f"    {line}" for line in aliases[:25])
    sections.append(f"\n## exact-handle migrants ({max(len(migrants) - 2, 0)})\n")
    sections.extend(f"    {line}" for line in migrants[:25])
    eval_path = out / "eval_test.json"
    if eval_path.exists():
        doc = json.loads(eval_path.read_text())
        sections.append(
            f"\n## closed-set metrics\n\n"
            f"    accuracy {doc['accuracy']:.4f}  micro-F1 {doc['micro_f1']:.4f}  "
            f"macro-F1 {doc['macro_f1']:.4f}"
        )
    bench_path = out / "benchmark.csv"
    if bench_path.exists():
        sections.append("\n## low-resource benchmark\n")
        sections.extend(f"    {line}" for line in bench_path.read_text().splitlines())
    _write_text(out / "report.md", "\n".join(sections) + "\n")
    print(f"report written to {out / 'report.md'}")
    return EXIT_OK


def cmd_synth(config: PipelineConfig, synth_dir: str | None = None) -> int:
    out = Path(synth_dir) if synth_dir else config.out() / "synth"
    out.mkdir(parents=True, exist_ok=True)
    seed = config.seed

    def _dump(records, name):
        with (out / name).open("w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    closed, _ = make_closed_set_records(seed=seed)
    _dump(closed, "closed_set.jsonl")
    idrecords, _, style_tensor = make_identify_fixture(seed=seed)
    _dump(idrecords, "multimarket.jsonl")
    save_embeddings(style_tensor, out / "style.vlemb")
    trecords, _, token_tensor, _ = make_transfer_fixture(seed=seed)
    _dump(trecords, "transfer.jsonl")
    save_embeddings(token_tensor, out / "token.vlemb")
    zs_source, zs_target = make_zero_shot_records(seed=seed)
    _dump(zs_source, "zs_source.jsonl")
    _dump(zs_target, "zs_target.jsonl")
    before, after = make_before_after_tensors(seed=seed)
    save_embeddings(before, out / "before.vlemb")
    save_embeddings(after, out / "after.vlemb")

    starter = {
        "seed": seed,
        "out_dir": str(config.out()),
        "corpus_path": str(out / "closed_set.jsonl"),
        "emb_before": str(out / "before.vlemb"),
        "emb_after": str(out / "after.vlemb"),
        "emb_style": str(out / "style.vlemb"),
        "emb_token": str(out / "token.vlemb"),
    }
    _write_text(out / "starter_config.json", json.dumps(starter, indent=2, sort_keys=True) + "\n")
    print(f"synthetic fixtures written under {out}")
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="vendorlens", description=__doc__)
    parser.add_argument("--version", action="version", version=f"vendorlens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", default=None, help="pipeline config JSON")
        p.add_argument("--out", dest="out_dir", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="root seed override")

    p = sub.add_parser("ingest", help="ingest, dedupe, truncate, label, split")
    common(p)
    p.add_argument("--corpus", dest="corpus_path", default=None)
    p.add_argument("--format", dest="corpus_format", choices=("jsonl", "csv"), default=None)

    p = sub.add_parser("sanity", help="stylometric vendor profiles + identical-vendor flags")
    common(p)

    p = sub.add_parser("train", help="train the closed-set classifier")
    common(p)
    p.add_argument("--kind", dest="classifier_kind", choices=("nb", "softmax", "mlp"), default=None)

    p = sub.add_parser("eval", help="evaluate a trained model on a split")
    common(p)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")

    p = sub.add_parser("cka", help="before/after per-layer CKA profile + layer selection")
    common(p)
    p.add_argument("--before", dest="emb_before", default=None)
    p.add_argument("--after", dest="emb_after", default=None)

    p = sub.add_parser("identify", help="open-set alias ranking reports")
    common(p)
    p.add_argument("--style", dest="emb_style", default=None)

    p = sub.add_parser("transfer", help="low-resource benchmark table")
    common(p)
    p.add_argument("--token", dest="emb_token", default=None)

    p = sub.add_parser("report", help="aggregate artifacts into report.md")
    common(p)

    p = sub.add_parser("synth", help="generate synthetic fixture corpora and tensors")
    common(p)
    p.add_argument("--dir", dest="synth_dir", default=None, help="fixture output directory")
    return parser


_OVERRIDE_KEYS = (
    "out_dir",
    "seed",
    "corpus_path",
    "corpus_format",
    "classifier_kind",
    "emb_before",
    "emb_after",
    "emb_style",
    "emb_token",
)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in _OVERRIDE_KEYS if getattr(args, k, None) is not None}
    try:
        config = load_config(args.config, overrides)
        _log_run(config, args.command)
        if args.command == "ingest":
            return cmd_ingest(config)
        if args.command == "sanity":
            return cmd_sanity(config)
        if args.command == "train":
            return cmd_train(config)
        if args.command == "eval":
            return cmd_eval(config, which=args.split)
        if args.command == "cka":
            return cmd_cka(config)
        if args.command == "identify":
            return cmd_identify(config)
        if args.command == "transfer":
            return cmd_transfer(config)
        if args.command == "report":
            return cmd_report(config)
        if args.command == "synth":
            return cmd_synth(config, synth_dir=args.synth_dir)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, MissingArtifact, RecordError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
