"""``isda`` command line: train, verify, sweep, eval.

Exit codes: 0 ok, 1 property failure, 2 usage/config error, 3 numerical divergence.
"""
import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

from . import _accel, checkpoint
from .config import ExperimentConfig, load_config
from .data import load_csv
from .errors import ConfigError, ContractViolation, DivergenceError, ParseError
from .loss import ClassifierHead
from .model import init_network
from .trainer import CSV_HEADER, evaluate, sweep_lambda, train
from .verify import SUITES, run_suite

log = logging.getLogger("isda")

EXIT_OK, EXIT_PROPERTY, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3


def _fmt(x):
    # repr round-trips float64 exactly
    return repr(float(x)) if isinstance(x, float) else str(x)


def _summary(cfg: ExperimentConfig, metrics, lambda0, seconds):
    recs = metrics.records
    val = [r.val_err for r in recs]
    best = min(range(len(recs)), key=lambda i: (val[i], i))
    return {
        "lambda0": lambda0,
        "covariance_mode": cfg.isda.covariance_mode.value,
        "schedule": cfg.isda.schedule.value,
        "epochs": len(recs),
        "final_val_error": recs[-1].val_err,
        "final_test_error": recs[-1].test_err,
        "best_val_error": val[best],
        "best_epoch": recs[best].epoch,
        f"last_{cfg.last_k}_test_error": metrics.last_k_test_error(cfg.last_k),
        "backend": _accel.BACKEND,
        "total_seconds": seconds,
    }


def run_training(cfg: ExperimentConfig, seed, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_set, val_set, test_set = cfg.load_datasets()
    sizes = cfg.sizes(train_set.dim)
    net = init_network(sizes, [seed, 0])
    head = ClassifierHead.init(train_set.num_classes, cfg.feature_dim, [seed, 1])
    csv_path = out_dir / "metrics.csv"
    fh = open(csv_path, "w", newline="", encoding="utf-8")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    steps_per_epoch = -(-len(train_set) // cfg.optimizer.batch_size)
    state = {}

    def on_epoch(rec, net_, head_, est):
        writer.writerow([_fmt(v) for v in (rec.epoch, rec.loss, rec.train_acc, rec.val_err, rec.lam, rec.seconds)])
        fh.flush()
        state.update(net=net_, head=head_, est=est, step=(rec.epoch + 1) * steps_per_epoch)
        if cfg.checkpoint_interval and (rec.epoch + 1) % cfg.checkpoint_interval == 0:
            ck = checkpoint.Checkpoint(net_, head_, est.class_statistics(), state["step"], cfg.config_hash())
            checkpoint.save(ck, out_dir / f"epoch{rec.epoch + 1:04d}.ckpt")

    start = time.perf_counter()
    try:
        net, head, est, metrics = train(
            net, head, train_set, cfg.optimizer, cfg.isda, seed=seed, val_set=val_set, test_set=test_set,
            ce_only=cfg.ce_only, schedule_unit=cfg.schedule_unit, on_epoch=on_epoch,
        )
    finally:
        fh.close()
    seconds = time.perf_counter() - start
    ck = checkpoint.Checkpoint(net, head, est.class_statistics(), state.get("step", 0), cfg.config_hash())
    checkpoint.save(ck, out_dir / "final.ckpt")
    summary = _summary(cfg, metrics, cfg.isda.lambda0, seconds)
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def cmd_train(args):
    try:
        cfg = load_config(args.config)
    except (ConfigError, ParseError, ContractViolation) as exc:
        print(f"isda train: {exc}", file=sys.stderr)
        return EXIT_USAGE
    seed = cfg.data_seed if args.seed is None else args.seed
    out_dir = args.out or cfg.output_dir
    try:
        summary = run_training(cfg, seed, out_dir)
    except DivergenceError as exc:
        print(f"isda train: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, ParseError, ContractViolation) as exc:
        print(f"isda train: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_verify(args):
    names = list(SUITES) if args.suite == "all" else [args.suite]
    report = {"suite": args.suite, "seed": args.seed, "backend": _accel.BACKEND, "suites": {}, "failures": []}
    for name in names:
        res = run_suite(name, args.trials, args.seed)
        report["suites"][name] = res
        for i, row in enumerate(res["trials"]):
            if not row["passed"]:
                report["failures"].append({"suite": name, "trial": i, "seed": row["seed"]})
    report["passed"] = not report["failures"]
    print(json.dumps(report, indent=2))
    return EXIT_OK if report["passed"] else EXIT_PROPERTY


def _parse_list(text, conv):
    try:
        return [conv(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad list: {text!r}") from None


def cmd_sweep(args):
    try:
        cfg = load_config(args.config)
        train_set, val_set, test_set = cfg.load_datasets()
    except (ConfigError, ParseError, ContractViolation) as exc:
        print(f"isda sweep: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not args.lambdas:
        print("isda sweep: need at least one lambda", file=sys.stderr)
        return EXIT_USAGE
    if val_set is None:
        val_set = test_set
    if val_set is None:
        print("isda sweep: config needs a validation split or a test set", file=sys.stderr)
        return EXIT_USAGE
    seeds = args.seeds or [cfg.data_seed]
    workers = 1 if cfg.reproducible else (_accel.thread_cap() or 1)
    try:
        rows, chosen = sweep_lambda(train_set, val_set, cfg.sizes(train_set.dim), cfg.optimizer, cfg.isda,
                                    args.lambdas, seeds, workers=workers, schedule_unit=cfg.schedule_unit)
    except DivergenceError as exc:
        print(f"isda sweep: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    out_dir = Path(args.out or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda0", "mean_val_err", "std", "runs"])
        for r in rows:
            w.writerow([_fmt(r.lambda0), _fmt(r.mean_val_err), _fmt(r.std), r.runs])
    print(f"selected lambda0 = {chosen!r}")
    return EXIT_OK


def cmd_eval(args):
    try:
        ck = checkpoint.load(args.checkpoint)
        ds = load_csv(args.csv)
    except FileNotFoundError as exc:
        print(f"isda eval: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ContractViolation) as exc:
        print(f"isda eval: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if ds.num_classes > ck.head.num_classes or ds.dim != ck.net.sizes[0]:
        print("isda eval: dataset does not match the checkpoint's input size or class count", file=sys.stderr)
        return EXIT_USAGE
    ds.num_classes = ck.head.num_classes
    err, ce = evaluate(ck.net, ck.head, ds)
    print(json.dumps({"error_rate": err, "mean_ce": ce, "samples": len(ds)}))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="isda", description="Implicit semantic data augmentation toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model from a JSON config")
    t.add_argument("config")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--out", default=None)
    t.set_defaults(func=cmd_train)

    v = sub.add_parser("verify", help="run the oracle property suites")
    v.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    v.add_argument("--trials", type=int, default=None)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="select lambda0 on the validation split")
    s.add_argument("config")
    s.add_argument("--lambdas", type=lambda x: _parse_list(x, float), required=True)
    s.add_argument("--seeds", type=lambda x: _parse_list(x, int), default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a CSV dataset")
    e.add_argument("checkpoint")
    e.add_argument("csv")
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _accel.configure_threads()
    if getattr(args, "trials", None) is not None and args.trials < 0:
        print("isda verify: --trials must be >= 0", file=sys.stderr)
        return EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
