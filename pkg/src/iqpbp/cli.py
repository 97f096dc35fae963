"""Command-line frontend: every analysis runs as a seeded, manifest-logged
job emitting stable CSV/JSON outputs.

Exit codes: 0 success, 2 bad arguments, 3 capacity exceeded, 4 verification
failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, bplab, oracle
from ._accel import rank_table
from .arch import architectures_for_scan, critical_rank, erdos_renyi, lattice, parse_architecture
from .charfn import (
    exact_char,
    exact_char_grad,
    parse_init_scheme,
    sample_thetas,
    var_char_closed,
    var_grad_closed,
)
from .errors import CapacityError, DimensionError
from .gf2 import BitVec
from .kernel import parse_kernel
from .streams import substream
from .trainer import TrainConfig, resolve_target, train

THREADS_ENV = "IQPBP_THREADS"


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    if value is None:
        return ""
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(cell) for cell in row) + "\n")


def _write_manifest(outdir: Path, command: str, args: argparse.Namespace,
                    argv: list[str], outputs: list[Path], extra: dict | None = None) -> Path:
    params = {
        k: v for k, v in vars(args).items() if k not in ("func", "command") and v is not None
    }
    manifest = {
        "tool": "iqpbp",
        "version": __version__,
        "command": command,
        "argv": argv,
        "parameters": params,
        "seed": params.get("seed"),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "outputs": [str(p) for p in outputs],
    }
    if extra:
        manifest.update(extra)
    path = outdir / f"{command}-manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, default=str)
        fh.write("\n")
    return path


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_n_list(text: str) -> list[int]:
    """Accept "4,6,8" or "2-10" (inclusive range)."""
    if "-" in text and "," not in text:
        lo, hi = text.split("-")
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",")]


def _resolve_theta(args, gen_set) -> np.ndarray:
    if getattr(args, "theta_file", None):
        with open(args.theta_file, "r", encoding="utf-8") as fh:
            theta = np.asarray(json.load(fh), dtype=np.float64)
        if theta.shape != (gen_set.num_generators,):
            raise ValueError(
                f"theta file has {theta.shape[0]} entries, circuit needs "
                f"{gen_set.num_generators}"
            )
        return theta
    scheme = parse_init_scheme(args.init)
    return sample_thetas(scheme, gen_set.num_generators, 1, substream(args.seed, "theta"))[0]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_ranks(args, argv) -> int:
    gen_set = parse_architecture(args.arch)
    n = gen_set.n
    rows = []
    if args.exhaustive:
        if n > 24:
            raise CapacityError(f"exhaustive mode loops over 2^{n} frequencies; cap is 2^24")
        ranks = rank_table(gen_set.masks(), n).astype(np.int64)
        values = np.arange(1 << n, dtype=np.uint64)
        sizes = np.zeros(1 << n, dtype=np.int64)
        for g in gen_set.generators:
            sizes += (np.bitwise_count(values & np.uint64(g.bits)) & 1).astype(np.int64)
        weights = np.bitwise_count(values).astype(np.int64)
        for value in range(1 << n):
            rows.append(_rank_row(BitVec(n, value), int(weights[value]),
                                  int(sizes[value]), int(ranks[value])))
    else:
        if args.a:
            freqs = [BitVec.from_string(args.a)]
        elif args.weights:
            span = _parse_n_list(args.weights)
            freqs = [
                BitVec.from_indices(n, combo)
                for w in span
                for combo in itertools.combinations(range(n), w)
            ]
        else:
            raise ValueError("ranks needs one of --a, --weights, --exhaustive")
        for a in freqs:
            report = critical_rank(gen_set, a)
            rows.append(_rank_row(a, a.weight, report.subset_size, report.rank))
    outdir = _outdir(args)
    csv_path = outdir / "ranks.csv"
    _write_csv(csv_path, ["a", "weight", "m_a", "r_a", "var_char_uniform", "var_grad_uniform"], rows)
    _write_manifest(outdir, "ranks", args, argv, [csv_path])
    print(f"wrote {csv_path} ({len(rows)} rows)")
    return 0


def _rank_row(a: BitVec, weight: int, size: int, rank: int) -> tuple:
    var_char = 0.0 if size == 0 else 2.0 ** (-rank)
    var_grad = 0.0 if size == 0 else 2.0 ** (2 - rank)
    return (str(a), weight, size, rank, var_char, var_grad)


def cmd_variance(args, argv) -> int:
    gen_set = parse_architecture(args.arch)
    a = BitVec.from_string(args.a)
    scheme = parse_init_scheme(args.init)
    header = ["arch", "n", "a", "ell", "scheme", "closed_form", "empirical",
              "stderr", "draws", "seed"]
    closed = None
    if args.mode in ("closed", "both"):
        if args.quantity == "char":
            closed = var_char_closed(gen_set, a, scheme)
        elif args.quantity == "grad":
            closed = var_grad_closed(gen_set, a, args.ell, scheme)
        else:
            raise ValueError("mmd-grad has no closed form; use --mode empirical")
    record = None
    if args.mode in ("empirical", "both"):
        pmf = parse_kernel(args.kernel, gen_set.n) if args.kernel else None
        target = None
        if args.target:
            with open(args.target, "r", encoding="utf-8") as fh:
                target = resolve_target(json.load(fh), gen_set.n)
        record = bplab.empirical_variance(
            args.quantity, gen_set, a, args.ell, scheme, target=target, pmf=pmf,
            draws=args.draws, seed=args.seed, threads=args.threads,
        )
    row = [gen_set.label, gen_set.n, str(a), args.ell, scheme.describe(),
           closed,
           record.empirical.mean if record else None,
           record.empirical.stderr if record else None,
           args.draws if record else 0, args.seed]
    if args.mode == "both":
        header.append("agreement_sigma")
        gap = abs(closed - record.empirical.mean)
        row.append(gap / record.empirical.stderr if record.empirical.stderr else 0.0)
    outdir = _outdir(args)
    csv_path = outdir / "variance.csv"
    _write_csv(csv_path, header, [row])
    _write_manifest(outdir, "variance", args, argv, [csv_path])
    print(f"wrote {csv_path}")
    return 0


def cmd_anticoncentration(args, argv) -> int:
    rows = []
    if args.family == "er-formula":
        for n in _parse_n_list(args.n_list):
            rows.append((n, bplab.er_anticoncentration_formula(n, args.c), "formula"))
    elif args.arch:
        gen_set = parse_architecture(args.arch)
        if args.method == "exact":
            rows.append((gen_set.n, bplab.anticoncentration_sum_exact(gen_set), "exact"))
        else:
            est = bplab.anticoncentration_sum_mc(gen_set, args.samples, args.seed)
            rows.append((gen_set.n, est.mean, "mc"))
    else:
        for n in _parse_n_list(args.n_list):
            gen_set = architectures_for_scan(args.family, n, c=args.c, seed=args.seed)
            if args.method == "exact":
                rows.append((n, bplab.anticoncentration_sum_exact(gen_set), "exact"))
            else:
                est = bplab.anticoncentration_sum_mc(gen_set, args.samples, args.seed)
                rows.append((n, est.mean, "mc"))
    outdir = _outdir(args)
    csv_path = outdir / "anticoncentration.csv"
    _write_csv(csv_path, ["n", "value", "method"], rows)
    _write_manifest(outdir, "anticoncentration", args, argv, [csv_path])
    print(f"wrote {csv_path} ({len(rows)} rows)")
    return 0


def cmd_scan(args, argv) -> int:
    scheme = parse_init_scheme(args.init)
    weight = args.fraction if args.fraction is not None else args.weight
    curve = bplab.bp_scaling_scan(
        args.family, _parse_n_list(args.n_list), weight, scheme,
        quantity=args.quantity, seed=args.seed, graph_seeds=args.graph_seeds,
        er_c=args.c,
    )
    outdir = _outdir(args)
    curve_path = outdir / "scan.csv"
    _write_csv(curve_path, ["n", "value"], curve.points)
    records_path = outdir / "scan_records.csv"
    _write_csv(
        records_path,
        ["arch", "n", "a", "ell", "scheme", "closed_form", "empirical", "stderr",
         "draws", "seed"],
        [
            (r.arch_label, r.n, str(r.frequency), r.ell, r.scheme, r.closed_form,
             r.empirical.mean if r.empirical else None,
             r.empirical.stderr if r.empirical else None, r.draws, r.seed)
            for r in curve.records
        ],
    )
    _write_manifest(outdir, "scan", args, argv, [curve_path, records_path],
                    extra={"slope": curve.slope, "slope_stderr": curve.slope_stderr})
    print(f"slope = {curve.slope:.6f} +- {curve.slope_stderr:.6f}")
    print(f"wrote {curve_path}, {records_path}")
    return 0


def cmd_train(args, argv) -> int:
    config = TrainConfig.from_json(args.config)
    trace = train(config)
    outdir = _outdir(args)
    trace_path = outdir / "trace.csv"
    _write_csv(trace_path, ["step", "loss", "loss_stderr", "grad_norm"], trace.csv_rows())
    theta_path = outdir / "theta.json"
    with open(theta_path, "w", encoding="utf-8") as fh:
        json.dump([float(x) for x in trace.final_theta], fh)
        fh.write("\n")
    _write_manifest(outdir, "train", args, argv, [trace_path, theta_path])
    print(f"wrote {trace_path}, {theta_path}")
    return 0


def cmd_sample(args, argv) -> int:
    gen_set = parse_architecture(args.arch)
    theta = _resolve_theta(args, gen_set)
    samples = oracle.sample_bitstrings(
        gen_set, theta, args.shots, substream(args.seed, "shots")
    )
    outdir = _outdir(args)
    path = outdir / "samples.txt"
    with open(path, "w", encoding="utf-8") as fh:
        for x in samples:
            fh.write(str(x) + "\n")
    _write_manifest(outdir, "sample", args, argv, [path])
    print(f"wrote {path} ({args.shots} bitstrings)")
    return 0


def cmd_probs(args, argv) -> int:
    gen_set = parse_architecture(args.arch)
    theta = _resolve_theta(args, gen_set)
    dist = oracle.statevector_probs(gen_set, theta)
    rows = [(str(BitVec(dist.n, x)), float(dist.probs[x])) for x in range(1 << dist.n)]
    outdir = _outdir(args)
    path = outdir / "probs.csv"
    _write_csv(path, ["x", "probability"], rows)
    _write_manifest(outdir, "probs", args, argv, [path])
    print(f"wrote {path}")
    return 0


def _verify_architectures(n: int, seed: int):
    yield parse_architecture(f"product:{n}")
    if n % 2 == 0:
        yield lattice(2, n // 2)
    else:
        yield lattice(1, n)
    yield erdos_renyi(n, 3.0, seed)
    yield parse_architecture(f"complete:{n}")


def cmd_oracle_verify(args, argv) -> int:
    n = args.n
    if n > 12:
        raise CapacityError("oracle verification is a small-n check; use n <= 12")
    rng = substream(args.seed, "oracle-verify")
    rows = []
    failed = False
    for gen_set in _verify_architectures(n, args.seed):
        depth = gen_set.num_generators
        max_char = max_grad = max_parseval = 0.0
        for _ in range(args.trials):
            theta = rng.random(depth) * 2.0 * np.pi
            a = BitVec(n, int(rng.integers(0, 1 << n)))
            dist = oracle.statevector_probs(gen_set, theta)
            chars = oracle.fourier_char_all(dist)
            max_char = max(max_char, abs(exact_char(gen_set, theta, a) - chars[a.bits]))
            ell = int(rng.integers(1, depth + 1))
            fd = _central_diff(
                lambda t: exact_char(gen_set, t, a), theta, ell, 1e-6
            )
            max_grad = max(max_grad, abs(exact_char_grad(gen_set, theta, a, ell) - fd))
            parseval = abs(
                (1 << n) * oracle.collision_probability(dist) - float(np.dot(chars, chars))
            )
            max_parseval = max(max_parseval, parseval)
        for check, err, tol in (
            ("char_vs_statevector", max_char, 1e-9),
            ("grad_vs_finite_difference", max_grad, 1e-6),
            ("parseval", max_parseval, 1e-8),
        ):
            status = "pass" if err <= tol else "FAIL"
            failed = failed or err > tol
            rows.append((gen_set.label, check, args.trials, err, tol, status))
    outdir = _outdir(args)
    path = outdir / "oracle_verify.csv"
    _write_csv(path, ["arch", "check", "trials", "max_error", "tolerance", "status"], rows)
    _write_manifest(outdir, "oracle-verify", args, argv, [path])
    for row in rows:
        print(",".join(_fmt(c) for c in row))
    return 4 if failed else 0


def _central_diff(fn, theta, ell, h):
    shift = np.zeros_like(theta)
    shift[ell - 1] = h
    return (fn(theta + shift) - fn(theta - shift)) / (2.0 * h)


def cmd_rerun(args, argv) -> int:
    with open(args.manifest, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    stored = list(manifest["argv"])
    if args.out:
        if "--out" in stored:
            i = stored.index("--out")
            stored[i + 1] = args.out
        else:
            stored += ["--out", args.out]
    return main(stored)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(sub, seed=True):
    sub.add_argument("--out", default=".", help="output directory")
    if seed:
        sub.add_argument("--seed", type=int, default=0, help="master seed")
    sub.add_argument(
        "--threads", type=int,
        default=int(os.environ.get(THREADS_ENV, "1")),
        help=f"worker threads (default from ${THREADS_ENV})",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iqpbp",
        description="Trainability analysis for IQP circuit Born machines.",
    )
    parser.add_argument("--version", action="version", version=f"iqpbp {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ranks", help="critical ranks and uniform-init variances")
    p.add_argument("--arch", required=True)
    p.add_argument("--a", help="single frequency as a 0/1 string")
    p.add_argument("--weights", help="weight sweep, e.g. 1-3 or 2")
    p.add_argument("--exhaustive", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_ranks)

    p = subs.add_parser("variance", help="closed-form vs empirical variances")
    p.add_argument("--arch", required=True)
    p.add_argument("--quantity", choices=list(bplab.QUANTITIES), default="grad")
    p.add_argument("--init", default="uniform")
    p.add_argument("--a", required=True)
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--draws", type=int, default=10_000)
    p.add_argument("--mode", choices=["closed", "empirical", "both"], default="both")
    p.add_argument("--kernel", help="spectrum spec (mmd-grad only)")
    p.add_argument("--target", help="target JSON file (mmd-grad only)")
    _add_common(p)
    p.set_defaults(func=cmd_variance)

    p = subs.add_parser("anticoncentration", help="anti-concentration sums")
    p.add_argument("--family", help="product | complete | lattice:<rows> | er | er-formula")
    p.add_argument("--arch", help="single architecture spec instead of a family sweep")
    p.add_argument("--n-list", default="4,6,8")
    p.add_argument("--method", choices=["exact", "mc"], default="exact")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--c", type=float, default=3.0)
    _add_common(p)
    p.set_defaults(func=cmd_anticoncentration)

    p = subs.add_parser("scan", help="variance scaling over qubit counts")
    p.add_argument("--family", required=True)
    p.add_argument("--n-list", required=True)
    p.add_argument("--quantity", choices=["char", "grad"], default="grad")
    p.add_argument("--weight", type=int, default=1, help="fixed frequency weight")
    p.add_argument("--fraction", type=float, help="frequency weight as a fraction of n")
    p.add_argument("--init", default="uniform")
    p.add_argument("--graph-seeds", type=int, default=100)
    p.add_argument("--c", type=float, default=3.0)
    _add_common(p)
    p.set_defaults(func=cmd_scan)

    p = subs.add_parser("train", help="SGD on the spectral MMD loss")
    p.add_argument("--config", required=True, help="TrainConfig JSON file")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("sample", help="draw bitstrings from the model")
    p.add_argument("--arch", required=True)
    p.add_argument("--theta-file", help="JSON array of angles")
    p.add_argument("--init", default="uniform", help="draw theta from this scheme")
    p.add_argument("--shots", type=int, default=1024)
    _add_common(p)
    p.set_defaults(func=cmd_sample)

    p = subs.add_parser("probs", help="exact output probabilities")
    p.add_argument("--arch", required=True)
    p.add_argument("--theta-file", help="JSON array of angles")
    p.add_argument("--init", default="uniform")
    _add_common(p)
    p.set_defaults(func=cmd_probs)

    p = subs.add_parser("oracle-verify", help="cross-check exact forms against the statevector oracle")
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--trials", type=int, default=50)
    _add_common(p)
    p.set_defaults(func=cmd_oracle_verify)

    p = subs.add_parser("rerun", help="re-execute a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="override the output directory")
    p.set_defaults(func=cmd_rerun)

    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    argv = list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.func is cmd_rerun:
            return cmd_rerun(args, argv)
        return args.func(args, argv)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    except (DimensionError, ValueError, KeyError, IndexError, OSError,
            json.JSONDecodeError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
