"""Command-line entry point: train, ablate, compute exact baselines, analyze
traces, and gradient-check the architectures.

Exit codes: 0 ok, 1 check failure, 2 usage/config error, 3 IO failure,
4 data error.  All output files are written atomically (temp + rename).
"""
from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .analysis import (
    ACTION_NAMES,
    DEFAULT_TREE_FEATURES,
    ROLE_TREE_FEATURES,
    action_frequency,
    extract_decision_tree,
    false_positive_rate,
    parity_agreement,
)
from .env import read_traces_jsonl
from .errors import BoundsError, DataError, InvalidConfigError, RiddleError
from .nets import HatsNet, SwitchNet
from .nncore import grad_check, save_checkpoint
from .strategies import exact_expected_reward, parity_expected_reward
from .training import (
    ABLATION_VARIANTS,
    METRICS_COLUMNS,
    TrainConfig,
    VariantFlags,
    generate_traces,
    train,
)

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4

TRACES_PER_EVAL = 10
CHECKPOINT_EVERY_DEFAULT = 1000

VERSION = "0.1.0"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _metrics_csv_text(rows) -> str:
    lines = [",".join(METRICS_COLUMNS)]
    for row in rows:
        lines.append(
            f"{row.episode},{row.n},{row.variant},{row.seed},"
            f"{row.mean_reward!r},{row.norm_reward!r},{row.loss!r},"
            f"{row.epsilon!r},{row.n_cap}"
        )
    return "\n".join(lines) + "\n"


def _resolve_out(out) -> Path:
    if out:
        return Path(out)
    env = os.environ.get("RIDDLE_DDRQN_OUT")
    return Path(env) if env else Path("runs")


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def run_training(cfg: TrainConfig, out_dir: Path) -> dict:
    """Execute one training run and persist its artifacts; returns the manifest."""
    out_dir.mkdir(parents=True, exist_ok=True)
    run_id = f"{cfg.riddle}-n{cfg.n}-{cfg.flags.name}-s{cfg.seed}"
    started = _now()
    if cfg.checkpoint_every == 0:
        cfg = dataclasses.replace(cfg, checkpoint_every=CHECKPOINT_EVERY_DEFAULT)

    rows = []
    traces = []
    checkpoints = []
    trace_rng = np.random.default_rng([cfg.seed, 1])

    def on_metrics(row, model):
        rows.append(row)
        traces.extend(generate_traces(model, cfg, TRACES_PER_EVAL, trace_rng))

    def on_checkpoint(episode, model):
        for i, store in enumerate(model.stores):
            name = f"checkpoint_{episode:06d}_{i}.ckpt"
            path = out_dir / name
            tmp = out_dir / (name + ".tmp")
            save_checkpoint(tmp, store, header={
                "run_id": run_id, "episode": episode, "store": i,
            })
            os.replace(tmp, path)
            checkpoints.append(name)

    result = train(cfg, on_metrics=on_metrics, on_checkpoint=on_checkpoint)

    atomic_write_text(out_dir / "metrics.csv", _metrics_csv_text(rows))
    atomic_write_text(
        out_dir / "traces.jsonl",
        "".join(t.to_json() + "\n" for t in traces),
    )
    manifest = {
        "run_id": run_id,
        "version": VERSION,
        "config": cfg.to_dict(),
        "started": started,
        "ended": _now(),
        "episodes": result.episodes,
        "status": "complete",
        "artifacts": {
            "metrics": "metrics.csv",
            "traces": "traces.jsonl",
            "checkpoints": checkpoints,
        },
    }
    atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2))
    return manifest


def cmd_train(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        doc = json.loads(text)
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.variant is not None:
            doc.pop("flags", None)
            doc["variant"] = args.variant
        cfg = TrainConfig.from_dict(doc)
    except (json.JSONDecodeError, InvalidConfigError, TypeError, ValueError) as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        manifest = run_training(cfg, _resolve_out(args.out))
    except OSError as exc:
        print(f"IO failure: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"run {manifest['run_id']}: {manifest['episodes']} episodes")
    return EXIT_OK


# ---------------------------------------------------------------------------
# ablate
# ---------------------------------------------------------------------------

def _ablate_one(payload):
    doc, variant, seed, out_dir = payload
    doc = dict(doc)
    doc.pop("flags", None)
    doc["variant"] = variant
    doc["seed"] = seed
    cfg = TrainConfig.from_dict(doc)
    sub = Path(out_dir) / f"{variant}_s{seed}"
    run_training(cfg, sub)
    return variant, seed, str(sub / "metrics.csv")


def cmd_ablate(args) -> int:
    try:
        doc = json.loads(Path(args.config).read_text())
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        seeds = [int(s) for s in args.seeds.split(",")]
    except ValueError:
        print(f"bad seed list {args.seeds!r}", file=sys.stderr)
        return EXIT_USAGE
    try:  # validate once up front so a bad config fails before any run
        TrainConfig.from_dict(dict(doc, variant="ddrqn", seed=seeds[0]))
    except InvalidConfigError as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out_dir = _resolve_out(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(doc, v, s, str(out_dir)) for v in ABLATION_VARIANTS for s in seeds]
    manifest = {
        "version": VERSION,
        "config": doc,
        "variants": list(ABLATION_VARIANTS),
        "seeds": seeds,
        "started": _now(),
        "status": "incomplete",
        "completed": [],
    }
    atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2))

    combined = [",".join(METRICS_COLUMNS)]

    def absorb(variant, seed, metrics_path):
        with open(metrics_path) as fh:
            lines = fh.read().splitlines()
        combined.extend(lines[1:])
        manifest["completed"].append(f"{variant}_s{seed}")
        atomic_write_text(out_dir / "ablation.csv", "\n".join(combined) + "\n")
        atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2))

    try:
        if args.jobs > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
                for variant, seed, path in pool.map(_ablate_one, jobs):
                    absorb(variant, seed, path)
        else:
            for payload in jobs:
                absorb(*_ablate_one(payload))
    except OSError as exc:
        print(f"IO failure: {exc}", file=sys.stderr)
        return EXIT_IO
    manifest["status"] = "complete"
    manifest["ended"] = _now()
    atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2))
    print(f"ablation complete: {len(jobs)} runs -> {out_dir / 'ablation.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

def cmd_oracle(args) -> int:
    try:
        if args.riddle == "hats":
            value = parity_expected_reward(args.n)
            print(f"parity\t{value}\t{float(value):.12g}")
        else:
            d_max = args.d_max if args.d_max is not None else max(1, 4 * args.n - 6)
            for policy in ("oracle", "tell_on_last_day"):
                ev = exact_expected_reward(policy, args.n, d_max)
                print(f"{policy}\t{ev.value}\t{ev.to_decimal()}")
    except (BoundsError, InvalidConfigError) as exc:
        print(f"{exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    try:
        traces = read_traces_jsonl(args.traces)
    except OSError as exc:
        print(f"cannot read traces: {exc}", file=sys.stderr)
        return EXIT_IO
    except DataError as exc:
        print(f"{exc} (line {exc.line_number})", file=sys.stderr)
        return EXIT_DATA
    try:
        if args.mode == "parity":
            frac = parity_agreement(traces)
            print(f"parity agreement: {100.0 * frac:.1f}%")
        elif args.mode == "freq":
            table = action_frequency(traces)
            lines = ["day,visited,action,count"]
            lines += [f"{d},{v},{a},{c}" for d, v, a, c in table.to_csv_rows()]
            text = "\n".join(lines) + "\n"
            if args.out:
                out_dir = Path(args.out)
                out_dir.mkdir(parents=True, exist_ok=True)
                atomic_write_text(out_dir / "freq.csv", text)
                print(f"wrote {out_dir / 'freq.csv'}")
            else:
                print(text, end="")
        elif args.mode == "tree":
            features = ROLE_TREE_FEATURES if args.features == "role" else DEFAULT_TREE_FEATURES
            tree = extract_decision_tree(traces, purity_floor=args.purity_floor,
                                         features=features)
            print(tree.to_text())
            if args.out:
                out_dir = Path(args.out)
                out_dir.mkdir(parents=True, exist_ok=True)
                atomic_write_text(out_dir / "tree.json",
                                  json.dumps(tree.to_json_dict(), indent=2))
        elif args.mode == "fpr":
            print(f"false positive rate: {false_positive_rate(traces):.4f}")
        else:
            print(f"unknown mode {args.mode!r}", file=sys.stderr)
            return EXIT_USAGE
    except RiddleError as exc:
        print(f"{exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"IO failure: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------

# Central differences are only valid if no ReLU preactivation crosses zero
# within the perturbation reach; evaluation points are redrawn until every
# preactivation clears this margin (step 1e-5 times a generous slope bound).
KINK_MARGIN = 1e-4


def _switch_gradcheck_loss(net, X, Y):
    def loss_fn(params, want_grad, margins=None):
        batch, steps, _ = X.shape
        h = np.zeros((batch, net.hidden))
        c = np.zeros((batch, net.hidden))
        caches, dQs = [], []
        loss = 0.0
        for t in range(steps):
            q, h, c, cache = net.step_forward(params, X[:, t], h, c)
            diff = q - Y[:, t]
            loss += float((diff ** 2).sum())
            caches.append(cache)
            dQs.append(2.0 * diff)
            if margins is not None:
                c1, c2, _, c4, c5, _ = cache  # (x, z) caches of the ReLU layers
                margins.extend(float(np.abs(z).min()) for _, z in (c1, c2, c4, c5))
        if want_grad:
            dh = np.zeros((batch, net.hidden))
            dc = np.zeros((batch, net.hidden))
            for t in reversed(range(steps)):
                dh, dc = net.step_backward(params, dQs[t], dh, dc, caches[t])
        return loss

    return loss_fn


def _hats_gradcheck_loss(net, heard, seen, m, n, Y):
    def loss_fn(params, want_grad, margins=None):
        q, cache = net.forward_decision(params, heard, seen, m, n)
        diff = q - Y
        if want_grad:
            net.backward_decision(params, 2.0 * diff, cache)
        if margins is not None:
            idx_cache, caches_a, caches_s, c1, c2, _, _ = cache
            relu_caches = [idx_cache, c1, c2]
            relu_caches += [e_cache for e_cache, _ in caches_a + caches_s]
            margins.extend(float(np.abs(z).min()) for _, z in relu_caches)
        return float((diff ** 2).sum())

    return loss_fn


def _gradcheck_setup(arch, n, seed, attempt):
    rng = np.random.default_rng([seed, attempt])
    if arch == "switch":
        net = SwitchNet(n_onehot=n, hidden=32)
        params = net.build_params()
        net.init_params(params, rng)
        batch, steps = 3, 2
        X = rng.uniform(-1.0, 1.0, size=(batch, steps, net.input_dim))
        Y = rng.uniform(-1.0, 1.0, size=(batch, steps, 4))
        loss_fn = _switch_gradcheck_loss(net, X, Y)
    else:
        net = HatsNet(hidden=16)
        params = net.build_params()
        net.init_params(params, rng)
        batch, m = 3, 2
        # Continuous stand-ins for the 0/1 tokens: gradient correctness is an
        # architecture property, and bit inputs put embeddings exactly on the
        # ReLU kink (zero input, zero bias).
        heard = rng.uniform(0.2, 0.8, size=(batch, m - 1))
        seen = rng.uniform(0.2, 0.8, size=(batch, n - m))
        Y = rng.uniform(-1.0, 1.0, size=(batch, 2))
        loss_fn = _hats_gradcheck_loss(net, heard, seen, m, n, Y)
    # Spread the biases too so preactivations are not clustered at zero.
    params.values += rng.uniform(-0.1, 0.1, size=params.size)
    return params, loss_fn


def cmd_gradcheck(args) -> int:
    params = loss_fn = None
    for attempt in range(50):
        params, loss_fn = _gradcheck_setup(args.arch, args.n, args.seed, attempt)
        margins = []
        loss_fn(params, False, margins=margins)
        if min(margins) > KINK_MARGIN:
            break
    else:
        print("no kink-free evaluation point found", file=sys.stderr)
        return EXIT_CHECK

    if args.corrupt:  # negative control: poison one analytic gradient entry
        inner = loss_fn

        def loss_fn(params, want_grad):
            value = inner(params, want_grad)
            if want_grad:
                params.grads[0] += 1e-2
            return value

    report = grad_check(params, loss_fn)
    status = "PASS" if report.passed else "FAIL"
    print(
        f"gradcheck {args.arch} n={args.n}: {status} "
        f"(max rel err {report.max_rel_err:.3e} in {report.worst_slot}, "
        f"tolerance {report.tolerance:.0e})"
    )
    return EXIT_OK if report.passed else EXIT_CHECK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riddle-ddrqn",
        description="Train and analyse communicating Q-learning agents on the "
                    "hats and switch riddles.",
    )
    parser.add_argument("--version", action="version", version=VERSION)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one training job from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--variant", default=None, choices=sorted(
        {"ddrqn", "no_share", "no_last_action", "replay", "naive", "switch_disabled"}
    ))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ablate", help="run the five method variants over a seed list")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("oracle", help="print exact baseline expected rewards")
    p.add_argument("--riddle", required=True, choices=("hats", "switch"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d-max", type=int, default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("analyze", help="run an analysis over a JSONL trace file")
    p.add_argument("--traces", required=True)
    p.add_argument("--mode", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--features", default="default", choices=("default", "role"))
    p.add_argument("--purity-floor", type=float, default=1.0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("gradcheck", help="finite-difference check of a full architecture")
    p.add_argument("--arch", required=True, choices=("hats", "switch"))
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
