"""Command-line interface.

Subcommands: synth, train, eval, cv, gradcheck, dump-filters.

Exit statuses: 0 success, 1 usage error, 2 data error, 3 numeric
failure (non-finite loss or a failed gradient check). All randomness
flows from --seed; when --seed is omitted the PCC_SEED environment
variable is used, falling back to 42.

Console number formatting is fixed (accuracy to 4 decimals, loss to 6)
so logs diff cleanly between runs.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import models, plots, report, synth, training
from .contour_data import FRAME_STEP, PADDED_LEN, ClassLabel, load_manifest
from .engine import grad_check, softmax_cross_entropy
from .errors import DataError, NumericError, PccError
from .seeding import GRADCHECK, PARAM_INIT, derive_rng
from .synth import SynthConfig, gen_contour

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

DEFAULT_SEED = 42
GRADCHECK_THRESHOLD = 1e-4


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this project reserves 2 for data
    errors, so remap to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("PCC_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise DataError(f"PCC_SEED is not an integer: {env!r}") from None
    return DEFAULT_SEED


def _add_seed(p):
    p.add_argument("--seed", type=int, default=None,
                   help="root random seed (default: $PCC_SEED or 42)")


def _add_train_flags(p):
    p.add_argument("--epochs", type=int, default=18, help="training epochs")
    p.add_argument("--batch", type=int, default=32, help="minibatch size")
    p.add_argument("--lr", type=float, default=1e-3, help="learning rate")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam",
                   help="optimizer")
    p.add_argument("--norm", choices=("scale500", "none"), default="scale500",
                   help="frame normalization scheme")


def build_parser() -> _Parser:
    parser = _Parser(prog="pcc", description=__doc__.strip().splitlines()[0]
                     if __doc__ else None)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic labelled corpus",
                       description="Generate labelled statement and wh-question "
                       "F0 contours. Loaders resample them on the fixed frame "
                       "grid and zero-pad to 1024 frames.",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--out", required=True, help="output directory")
    _add_seed(p)
    p.add_argument("--frame-step", type=float, default=FRAME_STEP,
                   help="frame spacing in seconds")
    p.add_argument("--noise", choices=tuple(sorted(synth.NOISE_PRESETS)),
                   default="moderate", help="noise preset")
    p.add_argument("--n-statements", type=int, default=1966,
                   help="statement productions")
    p.add_argument("--n-questions", type=int, default=2860,
                   help="wh-question productions")
    p.add_argument("--n-speakers-stmt", type=int, default=25,
                   help="statement speaker pool size")
    p.add_argument("--n-speakers-q", type=int, default=20,
                   help="question speaker pool size")
    p.add_argument("--preview", action="store_true",
                   help="also render a contour preview figure")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a classifier on a manifest",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--arch", choices=(models.ARCH_CONVNET, models.ARCH_LSTM),
                   required=True, help="architecture")
    p.add_argument("--data", required=True, help="manifest CSV path")
    p.add_argument("--out", required=True, help="output model path (.pcnm)")
    _add_seed(p)
    _add_train_flags(p)
    p.add_argument("--downsample", type=int, default=1,
                   help="input stride for the LSTM over the 1024 frames")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model on a manifest",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--model", required=True, help="model path (.pcnm)")
    p.add_argument("--data", required=True, help="manifest CSV path")
    p.add_argument("--norm", choices=("scale500", "none"), default=None,
                   help="normalization (default: the scheme the model was trained with)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cv", help="k-fold cross-validation with a report",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--arch", choices=(models.ARCH_CONVNET, models.ARCH_LSTM),
                   required=True, help="architecture")
    p.add_argument("--data", required=True, help="manifest CSV path")
    p.add_argument("--folds", type=int, default=10, help="number of folds")
    _add_seed(p)
    _add_train_flags(p)
    p.add_argument("--downsample", type=int, default=1,
                   help="input stride for the LSTM over the 1024 frames")
    p.add_argument("--out", default="cv_report", help="report output directory")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel fold workers (results identical to --jobs 1)")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("gradcheck",
                       help="verify backpropagation against finite differences",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--arch", choices=(models.ARCH_CONVNET, models.ARCH_LSTM),
                   required=True, help="architecture")
    _add_seed(p)
    p.add_argument("--inject-fault", action="store_true",
                   help="corrupt one gradient to exercise the failure path")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("dump-filters",
                       help="export first-layer convolution filters",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--model", required=True, help="ConvNet model path (.pcnm)")
    p.add_argument("--format", choices=("csv", "svg"), default="csv",
                   help="output format")
    p.add_argument("--out", required=True, help="output file path")
    p.set_defaults(func=cmd_dump_filters)

    return parser


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args, parser) -> int:
    seed = _resolve_seed(args.seed)
    try:
        cfg = SynthConfig(n_statements=args.n_statements,
                          n_questions=args.n_questions,
                          n_speakers_stmt=args.n_speakers_stmt,
                          n_speakers_q=args.n_speakers_q,
                          seed=seed, noise_level=args.noise,
                          frame_step=args.frame_step)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    dataset = synth.gen_corpus(cfg, args.out)
    n_stmt = int(np.sum(dataset.labels() == ClassLabel.STATEMENT))
    print(f"wrote {len(dataset)} contours to {args.out} "
          f"({n_stmt} statements, {len(dataset) - n_stmt} wh-questions)")
    print(f"config digest: {dataset.provenance.removeprefix('synth:')}")
    if args.preview:
        stmt_speakers, q_speakers = synth.draw_speakers(cfg)
        picks = [gen_contour(cfg, i, stmt_speakers, q_speakers)
                 for i in (0, 1, 2, cfg.n_statements, cfg.n_statements + 1,
                           cfg.n_statements + 2)]
        preview = Path(args.out) / "preview.png"
        plots.plot_contours(picks, preview)
        print(f"preview figure: {preview}")
    return EXIT_OK


def _train_config(args, seed: int) -> training.TrainConfig:
    try:
        return training.TrainConfig(epochs=args.epochs, batch_size=args.batch,
                                    optimizer=args.optimizer,
                                    learning_rate=args.lr, seed=seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


class UsageError(PccError):
    pass


def _arch_config(args):
    if args.arch == models.ARCH_CONVNET:
        return models.ConvNetConfig()
    try:
        return models.LstmConfig(input_downsample=args.downsample)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_train(args, parser) -> int:
    seed = _resolve_seed(args.seed)
    cfg = _train_config(args, seed)
    arch_cfg = _arch_config(args)
    data = load_manifest(args.data, scheme=args.norm)
    model = training._build_model(args.arch, arch_cfg,
                                  derive_rng(seed, PARAM_INIT))
    best, history = train_with_log(model, data, cfg)
    best.provenance["norm"] = args.norm
    best.provenance["arch"] = args.arch
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    models.save_model(best, out)
    history_csv = out.with_suffix(out.suffix + ".history.csv")
    report.write_history_csv(history, history_csv)
    plots.plot_history(history, out.with_suffix(out.suffix + ".history.png"),
                       best.provenance["selected_epoch"])
    print(f"kept epoch {best.provenance['selected_epoch']} "
          f"(loss {min(r.mean_loss for r in history):.6f}); model: {out}")
    print(f"history: {history_csv}")
    return EXIT_OK


def train_with_log(model, data, cfg):
    """training.train plus one printed line per completed epoch."""
    best, history = training.train(model, data, cfg)
    for rec in history:
        print(f"epoch {rec.epoch:2d}/{cfg.epochs}  loss {rec.mean_loss:.6f}  "
              f"acc {rec.accuracy:.4f}")
    return best, history


def cmd_eval(args, parser) -> int:
    bundle = models.load_model(args.model)
    scheme = args.norm or bundle.provenance.get("norm", "scale500")
    data = load_manifest(args.data, scheme=scheme)
    result = training.evaluate(bundle, data)
    c = result.confusion
    print(f"accuracy {result.accuracy:.4f} on {int(c.sum())} samples")
    print("confusion (rows true, cols predicted; statement, wh_question):")
    print(f"  statement    {c[0, 0]:6d} {c[0, 1]:6d}")
    print(f"  wh_question  {c[1, 0]:6d} {c[1, 1]:6d}")
    print(f"recall statement {result.recall(0):.4f}  "
          f"wh_question {result.recall(1):.4f}")
    return EXIT_OK


def cmd_cv(args, parser) -> int:
    if args.folds < 2:
        parser.error("--folds must be at least 2")
    seed = _resolve_seed(args.seed)
    cfg = _train_config(args, seed)
    arch_cfg = _arch_config(args)
    data = load_manifest(args.data, scheme=args.norm)
    summary, reports = training.cross_validate(args.arch, arch_cfg, data,
                                               k=args.folds, cfg=cfg,
                                               jobs=args.jobs)
    print(f"Min.     {summary.minimum:.4f}")
    print(f"1st Qu.  {summary.q1:.4f}")
    print(f"Median   {summary.median:.4f}")
    print(f"3rd Qu.  {summary.q3:.4f}")
    print(f"Max.     {summary.maximum:.4f}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    record = report.cv_report_dict(args.arch, arch_cfg, cfg, data.provenance,
                                   data.digest(), len(data), summary, reports, seed)
    report.write_json(record, out / "report.json")
    report.write_fold_csv(reports, out / "folds.csv")
    plots.plot_cv_accuracy(summary, reports, out / "accuracy.png")
    print(f"report: {out / 'report.json'}")
    return EXIT_OK


def _gradcheck_sample(rng, bundle):
    """Random input away from ReLU/maxpool kinks for the given model.

    A finite-difference step of 1e-4 on one parameter moves any conv
    pre-activation by at most 1e-4 (inputs are below 1), so margins of
    4e-4 guarantee no ReLU sign flip and no pooling argmax change. Pool
    windows whose runners-up are all zero are safe regardless: they stay
    zero under perturbation.
    """
    from . import engine
    margin = 4e-4
    for _ in range(200):
        values = rng.uniform(0.05, 0.9, size=PADDED_LEN)
        if bundle.arch != models.ARCH_CONVNET:
            return values
        z, _ = engine.conv1d_forward(values[None, None, :], bundle.weights.conv)
        if np.min(np.abs(z)) <= margin:
            continue
        a = np.maximum(z, 0.0)
        win = np.lib.stride_tricks.sliding_window_view(
            a[0], bundle.config.pool_window, axis=1)[:, ::bundle.config.pool_stride]
        top2 = np.sort(win, axis=-1)[..., -2:]
        gap = top2[..., 1] - top2[..., 0]
        contested = top2[..., 0] > 0.0
        if not np.any(contested & (gap <= margin)):
            return values
    raise NumericError("could not find a kink-free gradient-check point")


def gradcheck_arch(arch: str, seed: int, inject_fault: bool = False,
                   threshold: float = GRADCHECK_THRESHOLD,
                   verbose: bool = True) -> float:
    """Max relative gradient error across layers; raises NumericError
    above threshold."""
    rng = derive_rng(seed, GRADCHECK)
    if arch == models.ARCH_CONVNET:
        bundle = models.build_convnet(models.ConvNetConfig(), rng)
    else:
        # small recurrence keeps 2x200 finite-difference evaluations fast
        bundle = models.build_lstm(models.LstmConfig(hidden_size=12,
                                                     input_downsample=16), rng)
        # the training-scale init leaves some recurrent gradients near the
        # relative-error floor where finite-difference roundoff dominates;
        # any fixed weights verify the same math, so use larger ones
        bundle.weights.cell.w_x *= 12.0
        bundle.weights.cell.w_h *= 4.0
    values = _gradcheck_sample(rng, bundle)
    label = np.array([int(rng.integers(2))])
    x = values[None, :]
    lengths = np.array([PADDED_LEN])

    def loss_fn() -> float:
        logits, _ = models.forward_batch(bundle, x, lengths)
        losses, _, _ = softmax_cross_entropy(logits, label)
        return float(losses[0])

    logits, cache = models.forward_batch(bundle, x, lengths)
    _, dlogits, _ = softmax_cross_entropy(logits, label)
    grads = models.backward_batch(bundle, cache, dlogits)
    if inject_fault:
        grads[0] = grads[0] + 0.01

    worst = 0.0
    params = models.param_list(bundle)
    for name, tensor, grad in zip(models.param_names(bundle), params, grads):
        err = grad_check(loss_fn, [tensor], [grad], rng=rng)
        if verbose:
            print(f"  {name:14s} max rel err {err:.3e}")
        worst = max(worst, err)
    if worst > threshold:
        raise NumericError(f"gradient check failed: {worst:.3e} > {threshold:g}")
    return worst


def cmd_gradcheck(args, parser) -> int:
    seed = _resolve_seed(args.seed)
    print(f"gradient check: {args.arch}, seed {seed}")
    worst = gradcheck_arch(args.arch, seed, inject_fault=args.inject_fault)
    print(f"max relative error {worst:.3e} (threshold {GRADCHECK_THRESHOLD:g})")
    return EXIT_OK


def cmd_dump_filters(args, parser) -> int:
    bundle = models.load_model(args.model)
    if bundle.arch != models.ARCH_CONVNET:
        print("pcc dump-filters: model has no convolutional filters", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    if args.format == "csv":
        report.write_filters_csv(bundle, out)
    else:
        report.write_filters_svg(bundle, out)
    print(f"wrote {bundle.config.n_filters} filters to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except UsageError as exc:
        print(f"pcc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"pcc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"pcc: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"pcc: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
