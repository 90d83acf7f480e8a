"""Command-line pipeline: slicing, graph construction, path extraction and
selection, embedding training, recommender training and evaluation.

Every subcommand accepts --config FILE (key=value) plus flag overrides
(flags win), writes only the documented formats, and drops a manifest
(`<output>.manifest.json`) recording the effective configuration, seed and
input hashes so any run can be reproduced byte-for-byte.

Exit codes: 0 success, 1 validation/config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, fields

from . import __version__
from . import adg as adg_mod
from . import corpus as corpus_mod
from . import datagen, embed, evaluate, hylstm, ir, slicer
from .config import RunConfig, make_config
from .errors import DepgraphRecError, InputError

THREADS_ENV = "DEPGRAPH_REC_THREADS"


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_path: str, command: str, cfg: RunConfig,
                   inputs: list[str]) -> None:
    manifest = {
        "tool_version": __version__,
        "command": command,
        "config": asdict(cfg),
        "seed": cfg.seed,
        "input_hashes": {p: _sha256(p) for p in inputs if os.path.exists(p)},
    }
    with open(out_path + ".manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE",
                        help="key=value config file (flags override it)")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        ftype = int if f.type in (int, "int") else \
            float if f.type in (float, "float") else str
        parser.add_argument(flag, type=ftype, default=None, dest=f.name,
                            help=f"{f.name} (default: {f.default})")


def config_from_args(args) -> RunConfig:
    overrides = {f.name: getattr(args, f.name, None) for f in fields(RunConfig)}
    cfg = make_config(args.config, overrides)
    env_cap = os.environ.get(THREADS_ENV)
    if env_cap is not None:
        cfg.threads = max(1, min(cfg.threads, int(env_cap)))
    return cfg


def _slice_one(payload):
    source, criterion, depth = payload
    program = ir.parse_program(source)
    return slicer.backward_slice(program, criterion, depth)


def cmd_slice(args) -> int:
    cfg = config_from_args(args)
    with open(args.program, encoding="utf-8") as f:
        source = f.read()
    program = ir.parse_program(source)
    if args.corpus_mode == "byte":
        rows = []
        for name in program.functions:
            toks = []
            for stmt in program.functions[name].body:
                if stmt.kind is ir.StatementKind.API_CALL:
                    toks.append(stmt.api)
                elif stmt.kind is ir.StatementKind.CONST_LOAD:
                    toks.append(stmt.constant)
            if len(toks) >= 2:
                rows.append(corpus_mod.CorpusRow("bytecode", name,
                                                 tuple(toks[:-1]), toks[-1]))
        corpus_mod.write_corpus(rows, args.out)
        write_manifest(args.out, "slice", cfg, [args.program])
        return 0
    criteria = slicer.find_criteria(program, args.prefixes)
    depth = cfg.max_call_depth
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            slices = list(pool.map(_slice_one,
                                   [(source, c, depth) for c in criteria]))
    else:
        slices = [slicer.backward_slice(program, c, depth) for c in criteria]
    with open(args.out, "w", encoding="utf-8") as f:
        for s in slices:
            f.write(slicer.serialize_slice(s))
    if args.corpus_out:
        rows = []
        for i, s in enumerate(slices):
            toks, label = slicer.slice_tokens(s)
            if toks:
                rows.append(corpus_mod.CorpusRow("slice", f"s{i}",
                                                 tuple(toks), label))
        corpus_mod.write_corpus(rows, args.corpus_out)
    write_manifest(args.out, "slice", cfg, [args.program])
    return 0


def cmd_build_graph(args) -> int:
    cfg = config_from_args(args)
    with open(args.slices, encoding="utf-8") as f:
        slices = slicer.parse_slices(f.read())
    graphs = [adg_mod.build_adg(s, graph_id=f"g{i}")
              for i, s in enumerate(slices)]
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(adg_mod.serialize_adgs(graphs))
    if args.dot_dir:
        os.makedirs(args.dot_dir, exist_ok=True)
        for g in graphs:
            with open(os.path.join(args.dot_dir, f"{g.graph_id}.dot"),
                      "w", encoding="utf-8") as f:
                f.write(adg_mod.to_dot(g))
    write_manifest(args.out, "build-graph", cfg, [args.slices])
    return 0


def _load_graphs(path):
    with open(path, encoding="utf-8") as f:
        return adg_mod.parse_adgs(f.read())


def cmd_extract_paths(args) -> int:
    cfg = config_from_args(args)
    rows = []
    for g in _load_graphs(args.graphs):
        for p in adg_mod.extract_all_paths(g, cfg.max_len, args.max_paths):
            if p.tokens:
                rows.append(corpus_mod.CorpusRow("dep_path", g.graph_id,
                                                 p.tokens, p.label))
    corpus_mod.write_corpus(rows, args.out)
    write_manifest(args.out, "extract-paths", cfg, [args.graphs])
    return 0


def cmd_select_paths(args) -> int:
    cfg = config_from_args(args)
    rows = []
    for g in _load_graphs(args.graphs):
        for p in adg_mod.select_paths(g, cfg.path_budget, cfg.seed, cfg.max_len):
            if p.tokens:
                rows.append(corpus_mod.CorpusRow("dep_path", g.graph_id,
                                                 p.tokens, p.label))
    corpus_mod.write_corpus(rows, args.out)
    write_manifest(args.out, "select-paths", cfg, [args.graphs])
    return 0


def _build_or_load_vocab(args, cfg, rows):
    if getattr(args, "vocab", None) and os.path.exists(args.vocab):
        return corpus_mod.Vocabulary.load(args.vocab)
    vocab = corpus_mod.build_vocabulary(rows, cfg.api_min_freq,
                                        cfg.const_min_freq)
    if getattr(args, "vocab", None):
        vocab.save(args.vocab)
    return vocab


def cmd_train_embed(args) -> int:
    from . import report as report_mod
    cfg = config_from_args(args)
    rows = corpus_mod.read_corpus(args.corpus)
    vocab = _build_or_load_vocab(args, cfg, rows)
    sequences = [vocab.encode(r.tokens + (r.label,)) for r in rows]
    sg_cfg = embed.SkipGramConfig(dim=cfg.embed_dim, window=cfg.window,
                                  negatives=cfg.negatives, batch=cfg.batch,
                                  epochs=cfg.epochs, lr=cfg.embed_lr,
                                  seed=cfg.seed)
    mode = rows[0].origin if rows else "dep_path"
    table = embed.train_skipgram(sequences, vocab, sg_cfg, mode=mode)
    table.save(args.out)
    report_mod.save_embedding_loss(table.epoch_losses, args.out + ".loss.png")
    write_manifest(args.out, "train-embed", cfg, [args.corpus])
    return 0


def _split_records(rows, vocab, cfg):
    records = corpus_mod.encode_rows(rows, vocab, cfg.max_len)
    return corpus_mod.split_dataset(records, cfg.train_frac, cfg.seed)


def cmd_train(args) -> int:
    from . import report as report_mod
    cfg = config_from_args(args)
    rows = corpus_mod.read_corpus(args.corpus)
    vocab = _build_or_load_vocab(args, cfg, rows)
    train_recs, _ = _split_records(rows, vocab, cfg)
    emb_init = None
    if args.emb:
        table = embed.EmbeddingTable.load(args.emb)
        if table.vocab.id_to_token != vocab.id_to_token:
            raise InputError("embedding vocabulary differs from corpus vocabulary")
        emb_init = table.in_vecs
    model = hylstm.HyLstmModel.init(
        vocab.size, cfg.embed_dim if emb_init is None else emb_init.shape[1],
        cfg.hidden, cfg.layers, seed=cfg.seed, emb_init=emb_init,
        loss_mode=cfg.loss_mode, alpha=cfg.alpha,
        vocab_hash=vocab.content_hash())
    tcfg = hylstm.TrainConfig(hidden=cfg.hidden, layers=cfg.layers, lr=cfg.lr,
                              batch=cfg.batch, epochs=cfg.epochs,
                              alpha=cfg.alpha, loss_mode=cfg.loss_mode,
                              clip_norm=cfg.clip_norm, optimizer=cfg.optimizer,
                              seed=cfg.seed)
    rep = hylstm.train_single_path(model, train_recs, tcfg)
    model.save(args.out)
    report_mod.save_loss_curves(rep, args.out + ".loss.png",
                                title=f"{cfg.loss_mode} training")
    write_manifest(args.out, "train", cfg,
                   [args.corpus] + ([args.emb] if args.emb else []))
    return 0


def cmd_train_multi(args) -> int:
    from . import report as report_mod
    cfg = config_from_args(args)
    rows = corpus_mod.read_corpus(args.corpus)
    vocab = _build_or_load_vocab(args, cfg, rows)
    instances = datagen.rows_to_instances(rows)
    examples = [hylstm.PathSetExample(
        tuple(vocab.encode(p[-cfg.max_len:]) for p in inst.paths),
        vocab.encode_token(inst.label), inst.group_key) for inst in instances]
    train_ex, _ = corpus_mod.split_dataset(examples, cfg.train_frac, cfg.seed)
    if args.init:
        model = hylstm.HyLstmModel.load(args.init)
    else:
        emb_init = None
        if args.emb:
            emb_init = embed.EmbeddingTable.load(args.emb).in_vecs
        model = hylstm.HyLstmModel.init(
            vocab.size, cfg.embed_dim if emb_init is None else emb_init.shape[1],
            cfg.hidden, cfg.layers, seed=cfg.seed, emb_init=emb_init,
            vocab_hash=vocab.content_hash())
    tcfg = hylstm.TrainConfig(hidden=cfg.hidden, layers=cfg.layers, lr=cfg.lr,
                              batch=cfg.batch, epochs=cfg.epochs,
                              alpha=cfg.alpha, clip_norm=cfg.clip_norm,
                              optimizer=cfg.optimizer, seed=cfg.seed)
    rep = hylstm.train_multi_hylstm(model, train_ex, tcfg)
    model.save(args.out)
    report_mod.save_loss_curves(rep, args.out + ".loss.png",
                                title="multi-path fine-tuning")
    write_manifest(args.out, "train-multi", cfg,
                   [args.corpus] + ([args.init] if args.init else []))
    return 0


def cmd_eval(args) -> int:
    from . import report as report_mod
    cfg = config_from_args(args)
    rows = corpus_mod.read_corpus(args.corpus)
    vocab = _build_or_load_vocab(args, cfg, rows)
    model = hylstm.HyLstmModel.load(args.model)
    if args.multi:
        instances = datagen.rows_to_instances(rows)
        examples = [hylstm.PathSetExample(
            tuple(vocab.encode(p[-cfg.max_len:]) for p in inst.paths),
            vocab.encode_token(inst.label), inst.group_key)
            for inst in instances]
        train_ex, test_ex = corpus_mod.split_dataset(examples, cfg.train_frac,
                                                     cfg.seed)
        index = corpus_mod.NextSetIndex()
        for ex in train_ex:
            for p in ex.paths:
                index.add(p, ex.label)
        rep = evaluate.evaluate_multi(model, test_ex, index, vocab,
                                      name=args.name)
    else:
        train_recs, test_recs = _split_records(rows, vocab, cfg)
        index = corpus_mod.build_next_set_index(train_recs)
        rep = evaluate.evaluate(model, test_recs, index, vocab, name=args.name)
    evaluate.check_report_identities(rep)
    paths = report_mod.write_eval_outputs([rep], args.out)
    write_manifest(args.out + ".jsonl", "eval", cfg, [args.corpus, args.model])
    print(evaluate.compare_runs([rep]), end="")
    print("wrote:", ", ".join(paths))
    return 0


def cmd_recommend(args) -> int:
    config_from_args(args)  # validates flags
    vocab = corpus_mod.Vocabulary.load(args.vocab)
    model = hylstm.HyLstmModel.load(args.model)
    ids = vocab.encode(args.tokens.split())
    for tid in hylstm.recommend(model, ids, k=args.k):
        print(vocab.id_to_token[tid])
    return 0


def cmd_gen_synthetic(args) -> int:
    cfg = config_from_args(args)
    spec = datagen.ChallengeSpec(kind=args.kind, seed=cfg.seed)
    if args.kind == "low_freq_variant":
        rows = datagen.gen_low_freq_variant(spec)
        corpus_mod.write_corpus(rows, args.out)
    elif args.kind == "similar_api":
        spec.decisive_rate = args.decisive_rate
        rows = datagen.instances_to_rows(datagen.gen_similar_api(spec))
        corpus_mod.write_corpus(rows, args.out)
    elif args.kind == "random_dags":
        graphs = datagen.gen_random_dags(args.count, args.max_nodes, cfg.seed)
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(adg_mod.serialize_adgs(graphs))
    else:
        raise InputError(f"unknown kind {args.kind!r}")
    write_manifest(args.out, "gen-synthetic", cfg, [])
    return 0


def cmd_oracle_check(args) -> int:
    cfg = config_from_args(args)
    graphs = datagen.gen_random_dags(args.count, args.max_nodes, cfg.seed)
    failures = 0
    for g in graphs:
        paths = adg_mod.select_paths(g, cfg.path_budget, cfg.seed, cfg.max_len)
        again = adg_mod.select_paths(g, cfg.path_budget, cfg.seed, cfg.max_len)
        if paths != again:
            failures += 1
            print(f"{g.graph_id}: nondeterministic selection", file=sys.stderr)
            continue
        sc_token = g.token_of(g.sc)
        for p in paths:
            ok = p.label == sc_token and p.node_ids[-1] == g.sc
            for a, b in zip(p.node_ids, p.node_ids[1:]):
                ok = ok and any(e.src == a for e in g.predecessors(b))
            if not ok:
                failures += 1
                print(f"{g.graph_id}: invalid path {p.node_ids}", file=sys.stderr)
    print(f"checked {len(graphs)} graphs, {failures} failures")
    return 0 if failures == 0 else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depgraph-rec",
        description="Dependence-path guided next-API recommendation pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def new(name, func, help_):
        p = sub.add_parser(name, help=help_)
        add_config_flags(p)
        p.set_defaults(func=func)
        return p

    p = new("slice", cmd_slice, "backward-slice API callsites of a MiniIR program")
    p.add_argument("--program", required=True)
    p.add_argument("--prefixes", nargs="+", default=["Cipher."])
    p.add_argument("--out", required=True)
    p.add_argument("--corpus-out", help="also emit slice-mode corpus rows")
    p.add_argument("--corpus-mode", choices=["slice", "byte"], default="slice")

    p = new("build-graph", cmd_build_graph, "build API dependence graphs from slices")
    p.add_argument("--slices", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dot-dir", help="also dump DOT debug files here")

    p = new("extract-paths", cmd_extract_paths, "enumerate all dependence paths")
    p.add_argument("--graphs", required=True)
    p.add_argument("--max-paths", type=int, default=10_000)
    p.add_argument("--out", required=True)

    p = new("select-paths", cmd_select_paths,
            "budget-limited branch-covering path selection")
    p.add_argument("--graphs", required=True)
    p.add_argument("--out", required=True)

    p = new("train-embed", cmd_train_embed, "train skip-gram embeddings")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", help="vocabulary file to load or create")
    p.add_argument("--out", required=True)

    p = new("train", cmd_train, "train the single-path recommender")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab")
    p.add_argument("--emb", help="pretrained embedding file for initialization")
    p.add_argument("--out", required=True)

    p = new("train-multi", cmd_train_multi, "fine-tune the multi-path recommender")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab")
    p.add_argument("--emb")
    p.add_argument("--init", help="pretrained single-path checkpoint")
    p.add_argument("--out", required=True)

    p = new("eval", cmd_eval, "evaluate a checkpoint; writes table, JSONL, figure")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab")
    p.add_argument("--multi", action="store_true")
    p.add_argument("--name", default="run")
    p.add_argument("--out", required=True, help="output path prefix")

    p = new("recommend", cmd_recommend, "rank next-API candidates for a sequence")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--tokens", required=True, help="space-separated input tokens")
    p.add_argument("-k", type=int, default=5)

    p = new("gen-synthetic", cmd_gen_synthetic, "generate synthetic corpora/graphs")
    p.add_argument("--kind", required=True,
                   choices=["low_freq_variant", "similar_api", "random_dags"])
    p.add_argument("--decisive-rate", type=float, default=1.0)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--max-nodes", type=int, default=12)
    p.add_argument("--out", required=True)

    p = new("oracle-check", cmd_oracle_check,
            "validate path-selection invariants on random DAGs")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--max-nodes", type=int, default=12)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        print(f"error:validation: {e}", file=sys.stderr)
        return 1
    except (DepgraphRecError, OSError) as e:
        print(f"error:runtime: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
