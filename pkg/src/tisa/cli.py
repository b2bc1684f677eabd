"""Command-line interface.

Exit codes: 0 success, 2 bad input, 3 output could not be written,
4 numerical failure (training diverged).
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .core import gram
from .attention import TisaStack, eval_profile
from .errors import DomainError, ShapeError, TrainingError
from .fit import FitOptions, fit_kernels
from .introspect import aligned_sections, extract_all, extract_positional_scores
from .model.tasks import make_task
from .model.train import ArchSpec, count_positional_params, train
from .model.transformer import MODES, ToyModelConfig
from .toeplitz import embedding_toeplitzness, profile_offsets, toeplitzness

EXIT_OK, EXIT_INPUT, EXIT_OUTPUT, EXIT_NUMERIC = 0, 2, 3, 4


class OutputError(Exception):
    pass


def _write(fn, path, *args):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        fn(path, *args)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from None


def _read_matrix(path):
    try:
        return io.read_matrix(path)
    except OSError as exc:
        raise io.FormatError(f"cannot read {path}: {exc}") from None


def cmd_analyze(args):
    e_p = _read_matrix(args.embeddings)
    raw = embedding_toeplitzness(e_p)
    cos = embedding_toeplitzness(e_p, cosine=True)
    p = gram(e_p, cosine=args.cosine)
    _write(io.write_csv, args.out, ["i", "j", "value"], io.heatmap_rows(p))
    print(f"r2={(cos if args.cosine else raw).r2!r}")
    print(f"r2_inner_product={raw.r2!r}")
    print(f"r2_cosine={cos.r2!r}")
    return EXIT_OK


def _suffixed(path, layer, head):
    path = Path(path)
    return path.with_name(f"{path.stem}.l{layer}h{head}{path.suffix}")


def _extract_outputs(args, f, out, layer, head):
    _write(io.write_matrix, out, f)
    fit = toeplitzness(f)
    if args.profile_out:
        target = args.profile_out if args.head != "all" else _suffixed(args.profile_out, layer, head)
        _write(io.write_csv, target, ["offset", "value"], zip(profile_offsets(f.shape[0]), fit.profile))
    if args.sections:
        rows = [int(r) for r in args.sections.split(",") if r.strip()]
        sections = aligned_sections(f, rows, args.half_width, clip=args.clip)
        target = Path(out).with_suffix(".sections.csv")
        if args.sections_out:
            target = args.sections_out if args.head != "all" else _suffixed(args.sections_out, layer, head)
        _write(io.write_csv, target, ["row", "offset", "value"],
               ((s.row, k, v) for s in sections for k, v in zip(s.offsets, s.values)))
    return fit.r2


def cmd_extract(args):
    try:
        bundle = io.load_bundle(args.bundle)
    except OSError as exc:
        raise io.FormatError(f"cannot read bundle: {exc}") from None
    if args.head == "all":
        keys = [key for key in bundle.projections if key[0] == args.layer]
        if not keys:
            raise LookupError(f"bundle has no projections for layer {args.layer}")
        results = extract_all(bundle, jobs=args.jobs, keys=keys)
        for (layer, head), f in results.items():
            r2 = _extract_outputs(args, f, _suffixed(args.out, layer, head), layer, head)
            print(f"layer={layer} head={head} r2={r2!r}")
        return EXIT_OK
    head = int(args.head)
    f = extract_positional_scores(bundle, args.layer, head)
    r2 = _extract_outputs(args, f, args.out, args.layer, head)
    print(f"r2={r2!r}")
    return EXIT_OK


def cmd_fit(args):
    try:
        offsets, values = io.read_profile_csv(args.profile)
    except OSError as exc:
        raise io.FormatError(f"cannot read profile: {exc}") from None
    opts = FitOptions(S=args.kernels, window=args.window, restarts=args.restarts, seed=args.seed,
                      max_iters=args.max_iters, center=args.center, jobs=args.jobs)
    result = fit_kernels(offsets, values, opts, layer=args.layer, head=args.head)
    stack = TisaStack(H=args.head + 1, L=args.layer + 1, d_k=args.d_k)
    stack[args.layer, args.head] = result.params
    _write(lambda p: stack.save(p), args.out)
    ks = np.arange(args.center - args.window, args.center + args.window + 1)
    samples = args.samples or Path(args.out).with_suffix(".samples.csv")
    _write(io.write_csv, samples, ["offset", "value"], zip(ks, eval_profile(result.params, ks)))
    print(f"rss={result.rss!r}")
    print(f"iterations={result.iterations}")
    print(f"converged={str(result.converged).lower()}")
    return EXIT_OK


def cmd_train(args):
    config = ToyModelConfig(vocab=args.vocab, d=args.heads * args.d_k, d_k=args.d_k, H=args.heads,
                            L=args.layers, S=args.kernels, n_max=args.n, mode=args.mode,
                            seed=args.seed, freeze_pe=args.freeze_pe,
                            qk_positions=not args.no_qk_positions)
    task = make_task(args.task, args.n, args.vocab, seed=args.seed, offset=args.offset,
                     distance=args.distance, sampling=args.sampling)
    report = train(config, task, args.steps, lr=args.lr, batch=args.batch, eval_n=args.eval_n)
    out = Path(args.out)
    _write(io.save_checkpoint, out, config, report.params)
    _write(lambda p: p.write_text(report.to_json(include_time=args.record_time), encoding="utf-8"),
           out / "report.json")
    print(f"accuracy={report.eval_accuracy!r}")
    print(f"positional_params={report.positional_param_count}")
    print(f"final_loss={report.final_loss!r}")
    return EXIT_OK


def cmd_count_params(args):
    spec = ArchSpec(n=args.n, d=args.d, S=args.S, H=args.H, L=args.L, scheme=args.scheme)
    print(count_positional_params(spec))
    return EXIT_OK


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="tisa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="Gram-matrix heatmap and Toeplitzness of position embeddings")
    p.add_argument("--embeddings", required=True, help="MatrixFile with one position embedding per row")
    p.add_argument("--out", required=True, help="heatmap CSV (i,j,value)")
    p.add_argument("--cosine", action="store_true", help="row-normalize before the Gram product")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("extract", help="average positional attention scores of one head")
    p.add_argument("--bundle", required=True, help="bundle manifest JSON")
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--head", required=True, help="head index, or 'all' for every head of the layer")
    p.add_argument("--out", required=True, help="output MatrixFile")
    p.add_argument("--sections", help="comma-separated rows for aligned sections")
    p.add_argument("--half-width", type=int, default=8)
    p.add_argument("--clip", action="store_true", help="truncate sections at the matrix edge")
    p.add_argument("--sections-out", help="sections CSV (default: <out>.sections.csv)")
    p.add_argument("--profile-out", help="diagonal-mean profile CSV (offset,value) for 'fit'")
    p.add_argument("--jobs", type=_positive, default=1, help="worker threads for --head all")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("fit", help="regress RBF kernels onto an (offset,value) profile")
    p.add_argument("--profile", required=True)
    p.add_argument("--kernels", type=int, default=5)
    p.add_argument("--window", type=_positive, default=128)
    p.add_argument("--restarts", type=_positive, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=_positive, default=3000)
    p.add_argument("--center", type=int, default=0, help="offset the window is centered on")
    p.add_argument("--layer", type=int, default=0)
    p.add_argument("--head", type=int, default=0)
    p.add_argument("--d-k", type=int, default=None, help="recorded in the kernel JSON")
    p.add_argument("--jobs", type=_positive, default=1, help="restarts run concurrently")
    p.add_argument("--out", required=True, help="kernel JSON")
    p.add_argument("--samples", help="fitted f(k) CSV (default: <out>.samples.csv)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("train", help="train the toy transformer on a synthetic task")
    p.add_argument("--task", choices=("shift_copy", "distance_class"), default="shift_copy")
    p.add_argument("--offset", type=int, default=-1)
    p.add_argument("--distance", type=int, default=2)
    p.add_argument("--sampling", choices=("permutation", "iid"), default="permutation",
                   help="shift_copy token sampling")
    p.add_argument("--mode", choices=MODES, default="case_b_tisa_only")
    p.add_argument("--kernels", type=int, default=3)
    p.add_argument("--heads", type=_positive, default=2)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--d-k", type=_positive, default=16)
    p.add_argument("--vocab", type=_positive, default=16)
    p.add_argument("--n", type=_positive, default=16, help="training sequence length")
    p.add_argument("--eval-n", type=_positive, default=None, help="evaluation length (default --n)")
    p.add_argument("--steps", type=_positive, default=2000)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch", type=_positive, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--freeze-pe", action="store_true", help="keep position embeddings fixed")
    p.add_argument("--no-qk-positions", action="store_true",
                   help="case_a_with_pe: first-layer queries/keys see token embeddings only")
    p.add_argument("--record-time", action="store_true",
                   help="store wall time in report.json (makes it run-dependent)")
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("count-params", help="positional parameter count of an architecture")
    p.add_argument("--scheme", choices=("standard", "untied", "tisa"), required=True)
    p.add_argument("--n", type=_positive, default=512)
    p.add_argument("--d", type=_positive, default=768)
    p.add_argument("--S", type=_positive, default=5)
    p.add_argument("--H", type=_positive, default=12)
    p.add_argument("--L", type=_positive, default=12)
    p.set_defaults(func=cmd_count_params)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (io.FormatError, DomainError, ShapeError, LookupError, IndexError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
