"""Command-line entry point.

Every output file carries ``# format_version=`` and ``# invocation=`` comment
lines, and every randomized subcommand demands an explicit seed, so a saved
command line is enough to reproduce any output byte for byte.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from ._fileio import FORMAT_VERSION, FormatError, atomic_write_text, content_lines
from .anonymizer import (DEFAULT_FARTHEST_K, DEFAULT_ID_SUFFIX, DEFAULT_SELECT_N,
                         AnonymizationPolicy, anonymize_set)
from .coral import (DEFAULT_LAMBDA, DENORM_NONE, DENORM_TARGET, coral_apply_set, coral_fit,
                    load_transform, save_transform)
from .metrics import make_report, save_report
from .scenario import (DEFAULT_RUNS, coral_n_sweep, load_scenario_config, run_scenario,
                       save_experiment_report)
from .seeding import TAG_CORAL_SRC, TAG_CORAL_TGT, make_rng
from .statslinalg import project_2d, save_projection
from .synth import generate, parse_synth_spec
from .vectorstore import (VectorSet, generate_trials, load_trials, load_vector_set,
                          save_trials, save_vector_set)

log = logging.getLogger(__name__)


def _provenance_comments(argv: list[str]) -> list[str]:
    return [f"format_version={FORMAT_VERSION}",
            "invocation=vecanon " + " ".join(argv)]


def _read_id_list(path: Path) -> list[str]:
    return [line for _, line in content_lines(path)]


def _split_per_speaker(vs: VectorSet, n_enroll: int, n_test: int) -> tuple[list[str], list[str]]:
    """First n_enroll utterances of each speaker (set order) enroll, next n_test test."""
    by_speaker: dict[str, list[str]] = {}
    for v in vs:
        by_speaker.setdefault(v.speaker_id, []).append(v.utterance_id)
    enroll_ids: list[str] = []
    test_ids: list[str] = []
    for spk in sorted(by_speaker):
        utts = by_speaker[spk]
        if len(utts) < n_enroll + n_test:
            raise ValueError(
                f"speaker {spk!r} has {len(utts)} utterances, need "
                f"{n_enroll + n_test} for the requested split")
        enroll_ids += utts[:n_enroll]
        test_ids += utts[n_enroll:n_enroll + n_test]
    return enroll_ids, test_ids


def _subset_by_ids(vs: VectorSet, ids: list[str]) -> VectorSet:
    wanted = set(ids)
    return VectorSet(vs.dimension, tuple(v for v in vs if v.utterance_id in wanted))


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_synth(args, comments):
    spec = parse_synth_spec(args.spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sets = generate(spec)
    for label, vs in sets.items():
        save_vector_set(vs, out_dir / f"{label}.tsv", comments)
        log.info("wrote %s (%d vectors)", out_dir / f"{label}.tsv", len(vs))
    sidecar = [f"# format_version={FORMAT_VERSION}"] + comments[1:] + spec.describe_lines()
    atomic_write_text(out_dir / f"{Path(args.spec).stem}.provenance.txt",
                      "\n".join(sidecar) + "\n")
    return 0


def _cmd_anonymize(args, comments):
    sources = load_vector_set(args.in_path)
    pool = load_vector_set(args.pool)
    policy = AnonymizationPolicy(seed=args.seed, farthest_k=args.k, select_n=args.n,
                                 per_speaker=args.per_speaker, id_suffix=args.suffix)
    save_vector_set(anonymize_set(sources, pool, policy), args.out, comments)
    return 0


def _cmd_coral_fit(args, comments):
    source = load_vector_set(args.source)
    target = load_vector_set(args.target)
    seed_provenance = None
    if args.n_fit is not None:
        if args.seed is None:
            raise ValueError("--n-fit sampling requires an explicit --seed")
        src_rng = make_rng(args.seed, TAG_CORAL_SRC)
        tgt_rng = make_rng(args.seed, TAG_CORAL_TGT)
        if args.n_fit > len(source) or args.n_fit > len(target):
            raise ValueError(f"--n-fit {args.n_fit} exhausts the fit sets "
                             f"(source {len(source)}, target {len(target)})")
        source = source.subset(sorted(map(int, src_rng.choice(len(source), args.n_fit,
                                                              replace=False))))
        target = target.subset(sorted(map(int, tgt_rng.choice(len(target), args.n_fit,
                                                              replace=False))))
        seed_provenance = f"seed={args.seed} n={args.n_fit}"
    transform = coral_fit(source, target, args.lam, seed_provenance=seed_provenance)
    save_transform(transform, args.out, comments)
    return 0


def _cmd_coral_apply(args, comments):
    transform = load_transform(args.transform)
    vs = load_vector_set(args.in_path)
    save_vector_set(coral_apply_set(transform, vs, args.denorm_mode), args.out, comments)
    return 0


def _cmd_trials(args, comments):
    vs = load_vector_set(args.set)
    if args.enroll_list or args.test_list:
        if not (args.enroll_list and args.test_list):
            raise ValueError("--enroll-list and --test-list go together")
        enroll_ids = _read_id_list(Path(args.enroll_list))
        test_ids = _read_id_list(Path(args.test_list))
    elif args.enroll_per_speaker or args.test_per_speaker:
        if not (args.enroll_per_speaker and args.test_per_speaker):
            raise ValueError("--enroll-per-speaker and --test-per-speaker go together")
        enroll_ids, test_ids = _split_per_speaker(vs, args.enroll_per_speaker,
                                                  args.test_per_speaker)
    else:
        raise ValueError("give either --enroll-list/--test-list or "
                         "--enroll-per-speaker/--test-per-speaker")
    if args.impostors == "sampled" and args.seed is None:
        raise ValueError("sampled impostors require an explicit --seed")
    trials = generate_trials(vs, enroll_ids, test_ids, impostors=args.impostors,
                             count=args.impostor_count, seed=args.seed)
    save_trials(trials, args.out, comments)
    if args.write_enroll_set:
        save_vector_set(_subset_by_ids(vs, enroll_ids), args.write_enroll_set, comments)
    if args.write_test_set:
        save_vector_set(_subset_by_ids(vs, test_ids), args.write_test_set, comments)
    return 0


def _cmd_score(args, comments):
    enroll = load_vector_set(args.enroll)
    test = load_vector_set(args.test)
    trials = load_trials(args.trials)
    save_report(make_report(enroll, test, trials), args.out, comments)
    return 0


def _cmd_scenario(args, comments):
    config = load_scenario_config(args.config)
    report = run_scenario(config)
    save_experiment_report(report, args.out, comments)
    return 0


def _cmd_sweep(args, comments):
    config = load_scenario_config(args.config)
    n_values = [int(tok) for tok in args.n_values.split(",") if tok] if args.n_values else []
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = coral_n_sweep(config, n_values, runs=args.runs)
    for n, report in zip(n_values, reports):
        save_experiment_report(report, out_dir / f"coral_n_{n}.tsv", comments)
    summary = [f"# format_version={FORMAT_VERSION}"] + comments[1:]
    summary.append("n_fit\teer_mean\teer_std\tdivergence_mean")
    for n, report in zip(n_values, reports):
        div = repr(report.divergence_mean) if report.divergence_mean is not None else "-"
        summary.append(f"{n}\t{report.eer_mean!r}\t{report.eer_std!r}\t{div}")
    atomic_write_text(out_dir / "sweep_summary.tsv", "\n".join(summary) + "\n")
    return 0


def _cmd_project(args, comments):
    sets = [load_vector_set(p) for p in args.sets]
    save_projection(project_2d(sets), args.out, comments)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vecanon",
        description="Speaker-embedding anonymization, covariance alignment, and "
                    "EER-based privacy evaluation.")
    parser.add_argument("--version", action="version", version=f"vecanon {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic multi-domain corpus")
    p.add_argument("--spec", required=True, help="synthesis spec file (key = value)")
    p.add_argument("--out-dir", required=True, help="directory for per-domain dataset files")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("anonymize", help="replace vectors with farthest-pool subset means")
    p.add_argument("--in", dest="in_path", required=True, help="input dataset")
    p.add_argument("--pool", required=True, help="external vector pool dataset")
    p.add_argument("--out", required=True, help="output dataset")
    p.add_argument("--k", type=int, default=DEFAULT_FARTHEST_K,
                   help=f"farthest-pool depth (default {DEFAULT_FARTHEST_K})")
    p.add_argument("--n", type=int, default=DEFAULT_SELECT_N,
                   help=f"subset size to average (default {DEFAULT_SELECT_N})")
    p.add_argument("--seed", type=int, required=True, help="base seed (required)")
    p.add_argument("--per-speaker", action="store_true",
                   help="reuse one subset draw across each speaker's utterances")
    p.add_argument("--suffix", default=DEFAULT_ID_SUFFIX,
                   help=f"utterance-id suffix (default {DEFAULT_ID_SUFFIX!r})")
    p.set_defaults(func=_cmd_anonymize)

    p = sub.add_parser("coral-fit", help="fit a covariance-aligning transfer matrix")
    p.add_argument("--source", required=True, help="source-domain dataset")
    p.add_argument("--target", required=True, help="target-domain dataset")
    p.add_argument("--out", required=True, help="output transform file")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA,
                   help=f"covariance ridge term (default {DEFAULT_LAMBDA})")
    p.add_argument("--n-fit", type=int, default=None,
                   help="sample this many vectors from each domain (default: use all)")
    p.add_argument("--seed", type=int, default=None,
                   help="seed for --n-fit sampling (required with --n-fit)")
    p.set_defaults(func=_cmd_coral_fit)

    p = sub.add_parser("coral-apply", help="apply a fitted transform to a dataset")
    p.add_argument("--transform", required=True, help="transform file from coral-fit")
    p.add_argument("--in", dest="in_path", required=True, help="input dataset")
    p.add_argument("--out", required=True, help="output dataset")
    p.add_argument("--denorm-mode", choices=[DENORM_TARGET, DENORM_NONE],
                   default=DENORM_TARGET,
                   help="rescale outputs with target stats, or leave normalized "
                        "(default target)")
    p.set_defaults(func=_cmd_coral_apply)

    p = sub.add_parser("trials", help="build a genuine/impostor trial list")
    p.add_argument("--set", required=True, help="dataset holding enroll and test vectors")
    p.add_argument("--out", required=True, help="output trial list")
    p.add_argument("--enroll-list", help="file of enrollment utterance ids, one per line")
    p.add_argument("--test-list", help="file of test utterance ids, one per line")
    p.add_argument("--enroll-per-speaker", type=int,
                   help="take the first N utterances of each speaker for enrollment")
    p.add_argument("--test-per-speaker", type=int,
                   help="take the next N utterances of each speaker for test")
    p.add_argument("--impostors", choices=["exhaustive", "sampled"], default="exhaustive",
                   help="impostor pairing policy (default exhaustive)")
    p.add_argument("--impostor-count", type=int, default=None,
                   help="number of impostor pairs for --impostors sampled")
    p.add_argument("--seed", type=int, default=None,
                   help="seed for --impostors sampled (required there)")
    p.add_argument("--write-enroll-set", help="also write the enrollment-side dataset here")
    p.add_argument("--write-test-set", help="also write the test-side dataset here")
    p.set_defaults(func=_cmd_trials)

    p = sub.add_parser("score", help="score trials and compute the EER")
    p.add_argument("--enroll", required=True, help="enrollment dataset")
    p.add_argument("--test", required=True, help="test dataset")
    p.add_argument("--trials", required=True, help="trial list")
    p.add_argument("--out", required=True, help="output score report")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("scenario", help="run an attack scenario from a config file")
    p.add_argument("--config", required=True, help="flat key = value scenario config")
    p.add_argument("--out", required=True, help="output experiment report")
    p.set_defaults(func=_cmd_scenario)

    p = sub.add_parser("sweep", help="repeat a lazy-informed scenario over coral fit sizes")
    p.add_argument("--config", required=True, help="lazy_informed scenario config with coral")
    p.add_argument("--n-values", required=True, help="comma-separated fit sizes, e.g. 10,100")
    p.add_argument("--runs", type=int, default=None,
                   help=f"runs per fit size (default: config value, config default "
                        f"{DEFAULT_RUNS})")
    p.add_argument("--out-dir", required=True, help="directory for per-N reports")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("project", help="export a 2-D principal-axis projection as TSV")
    p.add_argument("--sets", nargs="+", required=True, help="dataset files to pool")
    p.add_argument("--out", required=True, help="output TSV")
    p.set_defaults(func=_cmd_project)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    comments = _provenance_comments(argv)
    try:
        return args.func(args, comments)
    except (FormatError, ValueError, KeyError, OSError) as exc:
        msg = str(exc) if not isinstance(exc, KeyError) else str(exc.args[0])
        print(f"vecanon: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
