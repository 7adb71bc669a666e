"""Command-line entry point.

Exit status: 0 on success, 1 when a verification fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .certificate import Certificate, check_certificate, extend_certificate_nt_to_el
from .eliminate import eliminate_system, max_stats, stream_stats, system_stats
from .errors import CollatzBoundsError
from .lp import build_lp_el, build_lp_nt
from .solver import MAX_PRECISION_BITS, MIN_PRECISION_BITS, Table2Row, search_lambda, table2_row
from .trees import build_system
from .verifier import check_lower_bound, check_theorem61, headline_csv

# Beyond this level the eliminated system no longer fits in memory.
MAX_MATERIALIZED_K = 4
CHECKPOINT_FROM_K = 9


class UsageError(Exception):
    pass


def _k_range(text: str) -> list[int]:
    try:
        if ".." in text:
            a, b = text.split("..")
            ks = list(range(int(a), int(b) + 1))
        else:
            ks = [int(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None
    if not ks or min(ks) < 2:
        raise argparse.ArgumentTypeError(f"levels must be >= 2, got {text!r}")
    return ks


def _level(text: str) -> int:
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if k < 2:
        raise argparse.ArgumentTypeError(f"k must be >= 2, got {k}")
    return k


def _float_list(text: str) -> list[int]:
    try:
        return [int(float(v)) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _write(text: str, emit: str | None) -> None:
    if emit:
        Path(emit).write_text(text)
    else:
        sys.stdout.write(text)


def _load_cert(path: str) -> Certificate:
    if not Path(path).is_file():
        raise UsageError(f"--cert: file not found: {path}")
    try:
        return Certificate.load(path)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"--cert: cannot read certificate {path}: {exc}") from None


def cmd_build_system(args) -> int:
    _write(build_system(args.k).to_text(), args.emit)
    return 0


def cmd_eliminate(args) -> int:
    k = args.k
    if k > MAX_MATERIALIZED_K:
        if not args.allow_huge:
            raise UsageError(f"--k {k}: elimination beyond k={MAX_MATERIALIZED_K} needs --allow-huge")
        if args.emit:
            raise UsageError("--emit is not available with --allow-huge (trees are streamed)")
        # incomplete rows describe the part explored before a limit was hit
        lines = ["k,class,depth,literals,complete"]
        for m in range(8, 3**k, 9):
            s = stream_stats(k, m, args.depth_limit, args.literal_limit, args.node_cap)
            lines.append(f"{k},{m},{s.depth},{s.literals},{int(s.complete)}")
        sys.stdout.write("\n".join(lines) + "\n")
        return 0
    system = eliminate_system(k, order=args.order, threads=args.threads, max_splits=args.max_splits)
    if args.emit:
        Path(args.emit).write_text(system.to_text())
    if args.stats or not args.emit:
        lines = ["k,class,depth,literals"]
        lines += [f"{k},{m},{s.depth},{s.literals}" for m, s in sorted(system_stats(system).items())]
        sys.stdout.write("\n".join(lines) + "\n")
    return 0


def cmd_build_lp(args) -> int:
    if args.family == "el":
        if args.k > MAX_MATERIALIZED_K:
            raise UsageError(f"--k {args.k}: the el family is only built up to k={MAX_MATERIALIZED_K}")
        lp = build_lp_el(args.k, eliminate_system(args.k, threads=args.threads))
    else:
        lp = build_lp_nt(args.k)
    _write(lp.format(), args.emit)
    return 0


def _search(args, k: int):
    ckpt = args.checkpoint
    if ckpt is None and k >= CHECKPOINT_FROM_K:
        ckpt = f"search-k{k}.ckpt.json"
    result = search_lambda(
        k,
        bracket_tol=args.tol,
        max_iter=args.max_iter,
        precision_bits=args.precision_bits,
        checkpoint=ckpt,
    )
    if ckpt is not None and args.checkpoint is None:
        Path(ckpt).unlink(missing_ok=True)
    return result


def cmd_search_lambda(args) -> int:
    result = _search(args, args.k)
    if args.emit:
        result.certificate.save(args.emit)
    row = table2_row(result)
    sys.stdout.write("k,lambda_lo,lambda_hi,gamma,C_k_max\n")
    sys.stdout.write(
        f"{args.k},{float(result.lam_lo):.10f},{float(result.lam_hi):.10f},"
        f"{row.gamma:.10f},{row.c_max:.7f}\n"
    )
    return 0


def cmd_verify(args) -> int:
    cert = _load_cert(args.cert)
    family = args.family or cert.family
    if family == "nt":
        if cert.family != "nt":
            raise UsageError("--family nt: certificate is for the el family")
        result = check_certificate(build_lp_nt(cert.k), cert)
    else:
        if cert.k > MAX_MATERIALIZED_K:
            raise UsageError(f"--family el: only available up to k={MAX_MATERIALIZED_K}")
        system = eliminate_system(cert.k, threads=args.threads)
        if cert.family == "nt":
            try:
                cert = extend_certificate_nt_to_el(cert, system)
            except CollatzBoundsError as exc:
                print(f"FAILED: {exc}")
                return 1
        result = check_certificate(build_lp_el(cert.k, system), cert)
    if result:
        print(f"verified family={family} k={cert.k} lambda={float(cert.lam):.10f} constraints={result.constraints}")
        return 0
    print(f"FAILED family={family} k={cert.k} constraint={result.id} slack={result.slack:g}")
    return 1


def cmd_table1(args) -> int:
    lines = ["k,depth,literals"]
    for k in args.k_range:
        if k > MAX_MATERIALIZED_K:
            raise UsageError(f"--k-range: table1 is materialised only up to k={MAX_MATERIALIZED_K}")
        s = max_stats(eliminate_system(k, threads=args.threads))
        lines.append(f"{k},{s.depth},{s.literals}")
    _write("\n".join(lines) + "\n", args.emit)
    return 0


def cmd_table2(args) -> int:
    if args.out != "csv":
        raise UsageError(f"--out: unsupported format {args.out!r}")
    lines = [Table2Row.HEADER]
    for k in args.k_range:
        lines.append(table2_row(_search(args, k)).csv())
    _write("\n".join(lines) + "\n", args.emit)
    return 0


def cmd_verify_bound(args) -> int:
    cert = _load_cert(args.cert)
    if cert.family != "nt":
        raise UsageError("--cert: verify-bound expects an nt certificate")
    report = check_lower_bound(args.a, cert, args.ymax)
    _write(report.csv(), args.emit)
    return 0 if report.passed else 1


def cmd_verify_headline(args) -> int:
    rows = check_theorem61(args.x)
    _write(headline_csv(rows), args.emit)
    return 0 if all(r.passed for r in rows) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collatz-bounds", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="worker cap")
    common.add_argument("--emit", help="write the artifact to this path instead of stdout")
    solve = argparse.ArgumentParser(add_help=False)
    solve.add_argument("--tol", type=float, default=1e-6, help="bisection bracket width")
    solve.add_argument("--max-iter", type=int, default=20_000)
    solve.add_argument(
        "--precision-bits", type=int, default=MIN_PRECISION_BITS,
        choices=[64, 128, 256, MAX_PRECISION_BITS],
    )
    solve.add_argument("--checkpoint", help="bracket checkpoint file (resumed if present)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-system", parents=[common], help="emit the base inequality trees")
    p.add_argument("--k", type=_level, required=True)
    p.set_defaults(func=cmd_build_system)

    p = sub.add_parser("eliminate", parents=[common], help="eliminate advanced terms")
    p.add_argument("--k", type=_level, required=True)
    p.add_argument("--order", choices=["bfs", "dfs"], default="bfs")
    p.add_argument("--stats", action="store_true")
    p.add_argument("--allow-huge", action="store_true", help="stream k >= 5 with early exit")
    p.add_argument("--max-splits", type=int, default=5_000_000)
    p.add_argument("--depth-limit", type=int, default=226)
    p.add_argument("--literal-limit", type=int, default=10**9)
    p.add_argument("--node-cap", type=int, default=None)
    p.set_defaults(func=cmd_eliminate)

    p = sub.add_parser("build-lp", parents=[common], help="emit a linear program")
    p.add_argument("--k", type=_level, required=True)
    p.add_argument("--family", choices=["nt", "el"], default="nt")
    p.set_defaults(func=cmd_build_lp)

    p = sub.add_parser("search-lambda", parents=[common, solve], help="bracket the supremal feasible lambda")
    p.add_argument("--k", type=_level, required=True)
    p.set_defaults(func=cmd_search_lambda)

    p = sub.add_parser("verify", parents=[common], help="check a certificate")
    p.add_argument("--cert", required=True)
    p.add_argument("--family", choices=["nt", "el"], default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("table1", parents=[common], help="elimination statistics")
    p.add_argument("--k-range", type=_k_range, default=[2, 3, 4])
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("table2", parents=[common, solve], help="lambda search table")
    p.add_argument("--k-range", type=_k_range, default=list(range(2, 9)))
    p.add_argument("--out", default="csv")
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("verify-bound", parents=[common], help="check the counting lower bound for one target")
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--cert", required=True)
    p.add_argument("--ymax", type=int, default=15)
    p.set_defaults(func=cmd_verify_bound)

    p = sub.add_parser("verify-headline", parents=[common], help="compare pi_1(x) with x^0.84")
    p.add_argument("--x", type=_float_list, default=[10**4, 10**5, 10**6])
    p.set_defaults(func=cmd_verify_headline)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except CollatzBoundsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
