"""Command-line interface.

Exit codes: 0 ok, 1 self-check failure, 2 usage, 3 data error, 4 model/shape
error. Reports go to stdout as CSV, logs to stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import classify, grasskernel, krpfs, linrank, preimage, selfcheck, seqdata
from .errors import (
    DegenerateSequence,
    FormatError,
    IoError,
    KindError,
    NumericalError,
    ParamError,
    ShapeError,
)
from .geometry import RcgConfig

log = logging.getLogger("krpool")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 0, 1, 2, 3, 4
METHODS = ("avg", "rp", "bkrp", "ibkrp", "krpfs")


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class RunConfig:
    method: str = "ibkrp"
    eta: float = 0.01
    lam: float = 1.0
    slack_c: float = 1.0
    use_slack: bool = True
    sigma: float | None = None  # None: per-sequence bandwidth rule
    p: int = 2
    iters: int | None = None
    jitter: float = 1e-8
    normalize: bool = False
    multistart: bool = False

    def pool(self, seq):
        if self.normalize:
            seq = seq.l2_normalized()
        if self.method == "avg":
            return linrank.avg_pool(seq)
        if self.method == "rp":
            prm = linrank.RankParams(eta=self.eta, lam=self.lam, max_iters=self.iters or 500)
            return linrank.rp_fit(seq, prm)
        if self.method in ("bkrp", "ibkrp"):
            prm = preimage.PreimageParams(
                eta=self.eta, lam=self.lam, slack_weight=self.slack_c, sigma=self.sigma,
                max_iters=self.iters or 500, use_slack=self.use_slack,
                multistart=self.multistart,
            )
            return preimage.preimage_fit(seq, prm, self.method)
        prm = krpfs.KrpfsParams(
            p=self.p, eta=self.eta, lam=self.lam, slack_weight=self.slack_c,
            jitter=self.jitter, sigma=self.sigma, use_slack=self.use_slack,
            rcg=RcgConfig(max_iters=self.iters or 100),
        )
        return krpfs.krpfs_fit(seq, prm)

    def order_rate(self, desc, seq):
        if self.normalize:
            seq = seq.l2_normalized()
        if desc.kind == "subspace":
            return krpfs.subspace_order_rate(desc, self.eta)
        if desc.method in ("bkrp", "ibkrp"):
            return preimage.preimage_order_rate(desc, seq, self.eta)
        return linrank.order_satisfaction(seq.frames @ desc.z, self.eta)


def worker_count(requested=None):
    env = os.environ.get("KRP_THREADS")
    if env:
        return max(1, int(env))
    if requested:
        return max(1, requested)
    return os.cpu_count() or 1


# ---------------------------------------------------------------- commands


def cmd_synth(args):
    spec = seqdata.SynthSpec(
        args.classes, args.per_class, args.n, args.d, args.noise, args.dynamics
    )
    ds = seqdata.synth_dataset(spec, args.seed)
    out = Path(args.out)
    rows = []
    counters = {}
    for seq, label in ds.items:
        s = counters.get(label, 0)
        counters[label] = s + 1
        name = f"seq_c{label}_{s:04d}.csv"
        seqdata.write_sequence(seq, out / name)
        rows.append((name, ds.label_names[label]))
    seqdata.write_manifest(rows, out / "manifest.csv")
    log.info("wrote %d sequences and %s", len(rows), out / "manifest.csv")
    print("path,label")
    for name, label in rows:
        print(f"{name},{label}")
    return EXIT_OK


def _load_rows(manifest):
    try:
        return seqdata.read_manifest_rows(manifest)
    except (FormatError, IoError) as exc:
        raise CliError(EXIT_DATA, str(exc)) from exc


def cmd_pool(args):
    cfg = RunConfig(
        method=args.method, eta=args.eta, lam=args.lam, slack_c=args.slack_c,
        use_slack=not args.no_slack, sigma=args.sigma, p=args.p, iters=args.iters,
        jitter=args.jitter, normalize=args.normalize, multistart=args.multistart,
    )
    rows = _load_rows(args.manifest)
    out = Path(args.out)

    def work(row):
        path, label = row
        try:
            seq = seqdata.load_sequence(path)
            desc = cfg.pool(seq)
        except DegenerateSequence as exc:
            raise CliError(EXIT_DATA, f"degenerate sequence {path}: {exc}") from exc
        except (FormatError, IoError, ParamError) as exc:
            raise CliError(EXIT_DATA, f"{path}: {exc}") from exc
        except NumericalError as exc:
            raise CliError(EXIT_MODEL, f"{path}: {exc}") from exc
        target = out / (Path(path).stem + ".krpd")
        seqdata.write_descriptor(desc, target)
        return target, label, desc, cfg.order_rate(desc, seq)

    with ThreadPoolExecutor(worker_count(args.threads)) as pool:
        results = list(pool.map(work, rows))

    header = "file,method,objective,iterations,order_rate"
    if args.verify:
        header += ",feasibility"
    print(header)
    bad = False
    for target, _, desc, rate in results:
        line = f"{target.name},{cfg.method},{desc.objective:.10g},{desc.iterations},{rate:.4f}"
        if args.verify:
            err = krpfs.feasibility(desc) if desc.kind == "subspace" else 0.0
            bad |= err > 1e-8
            line += f",{err:.2g}"
        print(line)
        if args.trace and desc.kind == "subspace":
            trace_rows = "".join(f"{i},{v!r}\n" for i, v in enumerate(desc.trace))
            seqdata.atomic_write(out / (target.stem + ".trace.csv"), trace_rows.encode())
    seqdata.write_manifest([(t.name, label) for t, label, _, _ in results], out / "manifest.csv")
    if bad:
        raise CliError(EXIT_MODEL, "descriptor violates A^T K A = I beyond 1e-8")
    return EXIT_OK


def _load_descriptors(manifest):
    rows = _load_rows(manifest)
    try:
        descs = [seqdata.read_descriptor(p) for p, _ in rows]
    except (FormatError, IoError) as exc:
        raise CliError(EXIT_DATA, str(exc)) from exc
    return descs, [label for _, label in rows], [p.name for p, _ in rows]


def cmd_gram(args):
    train, _, _ = _load_descriptors(args.train)
    try:
        hyper = args.hyper if args.hyper is not None else grasskernel.default_hyper(train)
        if args.test:
            test, _, _ = _load_descriptors(args.test)
            G = grasskernel.cross_gram_descriptors(test, train, hyper, args.cross_sigma)
        else:
            G = grasskernel.gram_descriptors(train, hyper, args.cross_sigma).values
    except (KindError, ShapeError) as exc:
        raise CliError(EXIT_MODEL, str(exc)) from exc
    write_matrix(G, args.out)
    log.info("wrote %dx%d Gram (hyper=%g) to %s", *G.shape, hyper, args.out)
    print(f"rows,cols,hyper\n{G.shape[0]},{G.shape[1]},{hyper!r}")
    return EXIT_OK


def write_matrix(M, path):
    body = "".join(",".join(repr(float(v)) for v in row) + "\n" for row in M)
    seqdata.atomic_write(path, body.encode())


def read_matrix(path):
    try:
        M = np.loadtxt(path, delimiter=",", ndmin=2)
    except FileNotFoundError as exc:
        raise CliError(EXIT_DATA, f"no such Gram file: {path}") from exc
    except ValueError as exc:
        raise CliError(EXIT_DATA, f"{path}: malformed Gram CSV") from exc
    return M


def _fused(paths):
    try:
        return grasskernel.fuse([read_matrix(p) for p in paths])
    except ShapeError as exc:
        raise CliError(EXIT_MODEL, str(exc)) from exc


def cmd_train(args):
    G = _fused(args.gram)
    rows = _load_rows(args.manifest)
    names = list(dict.fromkeys(label for _, label in rows))
    index = {n: i for i, n in enumerate(names)}
    y = np.array([index[label] for _, label in rows])
    if G.shape != (len(y), len(y)):
        raise CliError(EXIT_MODEL, f"Gram {G.shape} does not match {len(y)} training items")
    if args.reg == "auto":
        reg = classify.cross_validate_reg(G, y, class_count=len(names))
    else:
        reg = float(args.reg)
    try:
        model = classify.train(
            G, y, reg, len(names), [p.name for p, _ in rows], names
        )
    except (NumericalError, ParamError) as exc:
        raise CliError(EXIT_MODEL, str(exc)) from exc
    classify.save_model(model, args.out)
    pred, _ = classify.predict_many(model, G)
    print("metric,value")
    print(f"reg,{reg!r}")
    print(f"train_accuracy,{classify.accuracy(pred, y):.6f}")
    return EXIT_OK


def cmd_eval(args):
    try:
        model = classify.load_model(args.model)
    except (FormatError, IoError) as exc:
        raise CliError(EXIT_DATA, str(exc)) from exc
    R = _fused(args.gram)
    rows = _load_rows(args.manifest)
    if R.shape != (len(rows), model.m):
        raise CliError(
            EXIT_MODEL,
            f"Gram is {R.shape[0]}x{R.shape[1]}, expected {len(rows)}x{model.m}",
        )
    index = {n: i for i, n in enumerate(model.label_names)}
    unknown = sorted({label for _, label in rows} - set(index))
    if unknown:
        raise CliError(EXIT_MODEL, f"labels unknown to the model: {unknown}")
    y = np.array([index[label] for _, label in rows])
    pred, S = classify.predict_many(model, R)
    print("metric,value")
    print(f"accuracy,{classify.evaluate(pred, y, 'accuracy'):.6f}")
    print(f"mAP,{classify.evaluate(S, y, 'mAP'):.6f}")
    if args.predictions:
        body = "path,label,predicted\n" + "".join(
            f"{p.name},{label},{model.label_names[k]}\n" for (p, label), k in zip(rows, pred)
        )
        seqdata.atomic_write(args.predictions, body.encode())
    return EXIT_OK


def cmd_check(args):
    checks = selfcheck.run_checks(args.seed, args.inject_fault)
    print("check,status,value,limit")
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK


# ------------------------------------------------------------------ parser


def _nonneg(v):
    x = float(v)
    if not x >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {v}")
    return x


def _pos(v):
    x = float(v)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {v}")
    return x


def _pos_int(v):
    x = int(v)
    if x < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return x


def _sigma(v):
    return None if v == "auto" else _pos(v)


def _reg(v):
    return v if v == "auto" else str(_pos(v))


def build_parser():
    ap = argparse.ArgumentParser(prog="krpool", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic labelled dataset")
    s.add_argument("--classes", type=_pos_int, required=True)
    s.add_argument("--per-class", type=_pos_int, required=True)
    s.add_argument("--n", type=_pos_int, required=True)
    s.add_argument("--d", type=_pos_int, required=True)
    s.add_argument("--noise", type=_nonneg, default=0.0)
    s.add_argument("--dynamics", choices=[d.value for d in seqdata.Dynamics], default="spiral")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("pool", help="pool every sequence of a manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--method", choices=METHODS, default="ibkrp")
    s.add_argument("--eta", type=_pos, default=0.01)
    s.add_argument("--lambda", dest="lam", type=_nonneg, default=1.0)
    s.add_argument("--slack-c", type=_pos, default=1.0)
    s.add_argument("--no-slack", action="store_true", help="hinge weight lambda instead of min(C, lambda)")
    s.add_argument("--sigma", type=_sigma, default=None, help="'auto' or a fixed bandwidth")
    s.add_argument("--p", type=_pos_int, default=2)
    s.add_argument("--iters", type=_pos_int, default=None)
    s.add_argument("--jitter", type=_nonneg, default=1e-8)
    s.add_argument("--normalize", action="store_true", help="L2-normalize every frame")
    s.add_argument("--multistart", action="store_true")
    s.add_argument("--verify", action="store_true", help="report ||A^T K A - I||_F")
    s.add_argument("--trace", action="store_true", help="write objective traces as CSV")
    s.add_argument("--threads", type=_pos_int, default=None)
    s.set_defaults(func=cmd_pool)

    s = sub.add_parser("gram", help="classification Gram over descriptors")
    s.add_argument("--train", required=True, help="descriptor manifest")
    s.add_argument("--test", help="descriptor manifest; writes test x train rows")
    s.add_argument("--hyper", type=_pos, default=None, help="nu (subspace) or sigma_c (pre-image)")
    s.add_argument("--cross-sigma", type=_pos, default=None, help="global cross-sequence bandwidth")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gram)

    s = sub.add_parser("train", help="fit a one-vs-rest kernel ridge model")
    s.add_argument("--gram", action="append", required=True, help="repeat to average streams")
    s.add_argument("--manifest", required=True)
    s.add_argument("--reg", type=_reg, default="auto")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="score a test Gram with a trained model")
    s.add_argument("--model", required=True)
    s.add_argument("--gram", action="append", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--predictions")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("check", help="numerical self-tests")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--inject-fault", choices=["grad-sign"], default=None, help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_check)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except CliError as exc:
        log.error("%s", exc)
        return exc.code
    except ParamError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (DegenerateSequence, FormatError, IoError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except (KindError, ShapeError, NumericalError) as exc:
        log.error("%s", exc)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
