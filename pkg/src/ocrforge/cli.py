"""Command-line entry point: one `ocrforge` command with subcommands.

Each subcommand is a thin shell over one module; see README.md for a
walkthrough and docs/formats.md for the file formats involved.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ocrforge import augment, evalcer, lineimg, nags, orchestra, vote


def _cmd_prepare(args) -> int:
    config = lineimg.input_config(args.config)
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    count = 0
    for path in sorted(in_dir.iterdir()):
        if path.suffix.lower() not in lineimg.IMAGE_SUFFIXES:
            continue
        img = lineimg.load_line(path)
        baseline = lineimg.read_baseline_sidecar(path) if args.baselines else None
        out = lineimg.prepare(img, config, baseline)
        lineimg.save_line(out, out_dir / f"{path.stem}.png")
        gt = path.with_name(f"{path.stem}.gt.txt")
        if gt.exists():
            (out_dir / gt.name).write_bytes(gt.read_bytes())
        count += 1
    print(f"prepared {count} lines as {config.name} into {out_dir}")
    return 0


def _cmd_augment(args) -> int:
    plan = augment.load_plan(args.plan)
    n_new = augment.augment_directory(args.in_dir, args.out_dir, plan,
                                      seed=args.seed, workers=args.workers)
    print(f"wrote {n_new} augmented lines into {args.out_dir}")
    return 0


def _cmd_nags_enumerate(args) -> int:
    if args.grid:
        grid = nags.SearchGrid.from_dict(
            json.loads(Path(args.grid).read_text(encoding="utf-8")))
    else:
        grid = nags.default_search_grid()
    specs = nags.enumerate_grid(grid)
    invalid = nags.grid_size(grid) - len(specs)
    out = sys.stdout if args.out is None else open(args.out, "w",
                                                   encoding="utf-8")
    try:
        for spec in specs:
            out.write(nags.emit(spec) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    print(f"{nags.grid_size(grid)} candidates, {invalid} invalid, "
          f"{len(specs)} emitted", file=sys.stderr)
    return 0


def _cmd_nags_emit(args) -> int:
    spec = nags.parse(Path(args.spec).read_text(encoding="utf-8"))
    text = nags.emit(spec)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def _cmd_eval(args) -> int:
    if args.tsv:
        pairs = evalcer.read_pairs_from_tsv(args.tsv)
        ids = None
    else:
        ids, pairs = evalcer.read_pairs_from_dirs(args.gt, args.pred)
    if not pairs:
        print("no evaluation pairs found", file=sys.stderr)
        return 1
    rules = None
    if args.harmonize:
        rules = (evalcer.load_rules(args.rules) if args.rules
                 else evalcer.default_rules())
    report = evalcer.cer(pairs, rules=rules, ids=ids)
    if args.out_json:
        Path(args.out_json).write_text(report.to_json(), encoding="utf-8")
    if args.out_csv:
        report.write_csv(args.out_csv)
    mean_part = ("" if report.mean_line_cer is None
                 else f" (mean_line_cer {report.mean_line_cer:.6f}, "
                      "non-canonical)")
    print(f"cer {report.cer:.6f} over {len(report.lines)} lines{mean_part}")
    return 0


def _cmd_vote(args) -> int:
    n = vote.vote_directory(args.in_dir, args.out_dir)
    print(f"voted {n} lines into {args.out_dir}")
    return 0


def _cmd_ingest(args) -> int:
    manifest = orchestra.ingest(args.dir)
    manifest.save(args.out)
    print(f"manifest with {len(manifest.entries)} lines -> {args.out}")
    return 0


def _cmd_split(args) -> int:
    manifest = orchestra.DatasetManifest.load(args.manifest)
    fractions = [float(f) for f in args.fractions.split(",")]
    out = orchestra.split(manifest, fractions, args.seed)
    out.save(args.out)
    print(" ".join(f"{name}={size}" for name, size in sorted(out.counts().items())))
    return 0


def _parse_stages(text: str) -> list[int]:
    stages = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-")
            stages.extend(range(int(lo), int(hi) + 1))
        else:
            stages.append(int(part))
    return stages


def _parse_budgets(text: str) -> list[int | None]:
    return [None if part == "full" else int(part) for part in text.split(",")]


def _cmd_plan(args) -> int:
    manifest = (orchestra.DatasetManifest.load(args.manifest)
                if args.manifest else None)
    jobs = orchestra.plan_ablation(
        stages=_parse_stages(args.stages),
        budgets=_parse_budgets(args.budgets),
        replicates=args.replicates,
        manifest=manifest,
        manifest_path=args.manifest or "manifest.json",
        seed=args.seed,
    )
    paths = orchestra.emit_jobs(jobs, args.out)
    print(f"planned {len(paths)} jobs into {args.out}")
    return 0


def _cmd_collect(args) -> int:
    rows = orchestra.collect(args.jobs, args.results)
    if args.out_json:
        orchestra.write_report_json(rows, args.out_json)
    if args.out_csv:
        orchestra.write_report_csv(rows, args.out_csv)
    missing = sum(r.missing for r in rows)
    print(f"{len(rows)} stage/budget rows, {missing} missing results")
    return 0


def _cmd_stats(args) -> int:
    if args.values:
        values = [float(line) for line
                  in Path(args.values).read_text().split() if line]
        stats = orchestra.sample_stats(values)
        doc = {"mu": stats.mu, "sigma": stats.sigma, "min": stats.min,
               "n": stats.n, "single_sample": stats.single_sample}
        print(json.dumps(doc, sort_keys=True))
    if args.sigma is not None or args.detect is not None:
        if args.sigma is None or args.detect is None:
            print("--sigma and --detect must be given together",
                  file=sys.stderr)
            return 2
        n = orchestra.required_sample_size(args.sigma, args.detect,
                                           args.confidence)
        print(f"required replicates: {n}")
    if not args.values and args.sigma is None:
        print("nothing to do: pass --values and/or --sigma/--detect",
              file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ocrforge",
        description="OCR training pipeline toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="deskew/rescale/binarize line images")
    p.add_argument("--config", required=True,
                   choices=sorted(lineimg.INPUT_CONFIGS))
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--baselines", action="store_true",
                   help="honor <image>.baseline.json sidecars")
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("augment", help="run an augmentation plan on a directory")
    p.add_argument("--plan", required=True)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("nags", help="architecture grid tools")
    nags_sub = p.add_subparsers(dest="nags_command", required=True)
    q = nags_sub.add_parser("enumerate", help="emit every valid grid spec")
    q.add_argument("--grid", help="grid JSON (defaults to the full sweep)")
    q.add_argument("--out", help="JSONL output (defaults to stdout)")
    q.set_defaults(func=_cmd_nags_enumerate)
    q = nags_sub.add_parser("emit", help="canonicalize one spec descriptor")
    q.add_argument("--spec", required=True)
    q.add_argument("--out")
    q.set_defaults(func=_cmd_nags_emit)

    p = sub.add_parser("eval", help="compute CER for prediction/transcript pairs")
    p.add_argument("--gt", help="directory of <name>.gt.txt files")
    p.add_argument("--pred", help="directory of <name>.pred.txt files")
    p.add_argument("--tsv", help="two-column gt<TAB>pred file instead of dirs")
    p.add_argument("--harmonize", action=argparse.BooleanOptionalAction,
                   default=True)
    p.add_argument("--rules", help="harmonization rules JSON")
    p.add_argument("--out-json")
    p.add_argument("--out-csv")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("vote", help="vote per-fold predictions into consensus")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.set_defaults(func=_cmd_vote)

    p = sub.add_parser("ingest", help="build a manifest from image+gt pairs")
    p.add_argument("--dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("split", help="retag manifest entries into splits")
    p.add_argument("--manifest", required=True)
    p.add_argument("--fractions", required=True, help="e.g. 0.8,0.2")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("plan", help="expand an ablation into job descriptors")
    p.add_argument("--stages", required=True, help="e.g. 1-9 or 1,3,6")
    p.add_argument("--budgets", default="full", help="e.g. 2000,5000,full")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--manifest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="job descriptor directory")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("collect", help="aggregate job results into a report")
    p.add_argument("--jobs", required=True, help="job descriptor directory")
    p.add_argument("--results", required=True, help="per-job result directory")
    p.add_argument("--out-json")
    p.add_argument("--out-csv")
    p.set_defaults(func=_cmd_collect)

    p = sub.add_parser("stats", help="replicate statistics and sizing")
    p.add_argument("--values", help="file of CER values, one per line")
    p.add_argument("--sigma", type=float, help="replicate stddev")
    p.add_argument("--detect", type=float,
                   help="smallest mean difference to resolve")
    p.add_argument("--confidence", type=float, default=0.95)
    p.set_defaults(func=_cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
