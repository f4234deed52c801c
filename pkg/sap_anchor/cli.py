# coding=utf-8
#
# cli.py
# SAP Anchor - Command Line
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
"""The command-line interface of the package, installed as `sap-anchor`.

Every subcommand reads the run configuration (`--config`), applies `--set section.key=value`
    overrides and its own flags, and writes its outputs into the run directory (`--run-dir`)
    together with a `manifest.json` listing everything it produced.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors (unreadable files, bad
    configuration, corrupt checkpoints), 3 on numeric failures (divergence, failed gradient
    checks).
"""
import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .api.ablation import run_ablation, write_table, ARMS
from .api.features import export_features, fixed_anchor_pairs
from .api.info import get_run_information
from .api.model import SAPModel, stack_sequences
from .api.sap import propose_anchor_pairs, export_anchors
from .api.train import TrainConfig, train, evaluate, build_model, restore_model
from .core.checkpoint import load_checkpoint
from .core.dataset import write_dataset, atomic_write
from .core.errors import SAPError, SAPNumericError
from .core.gradcheck import finite_difference_check
from .core.manifest import RunManifest
from .core.ntu import read_ntu_file
from .core.skeleton import NTU_LAYOUT, normalize_sequence, resample_frames
from .core.template import generate_template

_LOG = logging.getLogger(__name__)

COMMANDS = ("gen-data", "parse", "featurize", "train", "eval", "ablate", "gradcheck",
            "export-anchors", "init-config")

CHECKPOINT_NAME = "checkpoint.sapc"


class SAPUsageError(SAPError):
    """The command line could not be understood."""


class _ArgumentParser(argparse.ArgumentParser):

    def error(self, message):
        raise SAPUsageError("%s: %s" % (self.prog, message))


def _write_json(manifest, name, payload):
    path = os.path.join(manifest.run_dir, name)
    atomic_write(path, json.dumps(payload, indent=2, sort_keys=True).encode("utf-8"))
    manifest.add_artifact(path)
    return path


def _write_confusion(manifest, name, confusion):
    path = os.path.join(manifest.run_dir, name)
    np.savetxt(path, confusion, fmt="%d", delimiter=",")
    manifest.add_artifact(path)


def _split(args, train_set, test_set):
    return train_set if args.split == "train" else test_set


def _checkpoint_path(args):
    return args.checkpoint or os.path.join(args.run_dir, CHECKPOINT_NAME)


def _model_for(args, reader, sequences):
    """Restore the model of a checkpoint, or build a fresh one when no checkpoint exists."""
    path = _checkpoint_path(args)
    if os.path.isfile(path):
        model, _ = restore_model(load_checkpoint(path))
        return model
    if args.checkpoint:
        raise SAPUsageError("Checkpoint %s does not exist." % path)
    _LOG.warning("No checkpoint at %s; using freshly initialized parameters.", path)
    classes = max([s.label or 0 for s in sequences]) + 1
    return build_model(TrainConfig.from_reader(reader), sequences[0].joints, classes)


def command_gen_data(args, reader, manifest):
    train_set, test_set = get_run_information(with_data=True, **args.run_kwargs)[1:]
    for name, sequences in (("train.sapds", train_set), ("test.sapds", test_set)):
        if sequences:
            path = os.path.join(args.run_dir, name)
            write_dataset(path, sequences)
            manifest.add_artifact(path)
    if reader.data["source"] == "synthetic":
        _write_json(manifest, "task.json", reader.task_spec().as_dict())
    return 0


def command_parse(args, reader, manifest):
    min_frames = max(reader.data["min_frames"], args.frames or 1)
    sequences = []
    for path in args.files:
        seq = read_ntu_file(path, NTU_LAYOUT, min_frames)
        if args.frames:
            seq = resample_frames(seq, args.frames)
        if args.normalize:
            seq = normalize_sequence(seq, NTU_LAYOUT)
        sequences.append(seq)
        print("%s: %s frames, label %s" % (path, seq.frames, seq.label))
    output = os.path.join(args.run_dir, args.output)
    write_dataset(output, sequences)
    manifest.add_artifact(output)
    return 0


def command_featurize(args, reader, manifest):
    _, train_set, test_set = get_run_information(**args.run_kwargs)
    sequences = _split(args, train_set, test_set)[:args.limit]
    model = _model_for(args, reader, sequences)
    features = [model.features(seq) for seq in sequences]
    output = os.path.join(args.run_dir, "features-%s.sapds" % args.split)
    export_features(features, output, [seq.label for seq in sequences])
    manifest.add_artifact(output)
    manifest.add_artifact(output + ".json")
    return 0


def command_train(args, reader, manifest):
    _, train_set, test_set = get_run_information(**args.run_kwargs)
    config = TrainConfig.from_reader(reader)
    resume = load_checkpoint(args.resume) if args.resume else None
    path = os.path.join(args.run_dir, CHECKPOINT_NAME)
    _, report = train(train_set, config, test_set=test_set, resume=resume,
                      checkpoint_path=path, meta={"config": reader.snapshot()})
    if os.path.isfile(path):
        manifest.add_artifact(path)
    _write_json(manifest, "report.json", report.as_dict())
    _write_confusion(manifest, "confusion.csv", report.confusion)
    print("Final accuracy: %.4f" % report.test_accuracy)
    return 0


def command_eval(args, reader, manifest):
    _, train_set, test_set = get_run_information(**args.run_kwargs)
    model, _ = restore_model(load_checkpoint(_checkpoint_path(args)))
    result = evaluate(model, _split(args, train_set, test_set))
    _write_json(manifest, "eval-%s.json" % args.split, result.as_dict())
    _write_confusion(manifest, "confusion-%s.csv" % args.split, result.confusion)
    print("Accuracy on %s: %.4f" % (args.split, result.accuracy))
    return 0


def command_ablate(args, reader, manifest):
    _, train_set, test_set = get_run_information(**args.run_kwargs)
    seeds = [int(seed) for seed in args.seeds.split(",") if seed.strip()]
    arms = [arm.strip() for arm in args.arms.split(",") if arm.strip()] if args.arms else None
    table = run_ablation(args.axis, TrainConfig.from_reader(reader), train_set, test_set, seeds,
                         arms=arms)
    path = os.path.join(args.run_dir, "ablation-%s.json" % args.axis)
    write_table(path, table)
    manifest.add_artifact(path)
    for row in table:
        print("%-20s seed %-4s test %.4f train %.4f" % (row["arm"], row["seed"],
                                                          row["test_accuracy"],
                                                          row["train_accuracy"]))
    return 0


def _check_gradcheck_args(args):
    for flag in ("batch", "frames", "hidden", "max_entries"):
        if getattr(args, flag) < 1:
            raise SAPUsageError("--%s must be at least 1; received %s."
                                % (flag.replace("_", "-"), getattr(args, flag)))
    if not 1e-7 <= args.step <= 1e-3:
        raise SAPUsageError("--step must lie in [1e-7, 1e-3]; received %s." % args.step)
    if not args.tol > 0:
        raise SAPUsageError("--tol must be positive; received %s." % args.tol)


def command_gradcheck(args, reader, manifest):
    _check_gradcheck_args(args)
    _, train_set, _ = get_run_information(**args.run_kwargs)
    # A narrow classifier on a few frames keeps the check affordable.
    config = TrainConfig.from_reader(reader).copy(hidden_sizes=[args.hidden])
    rng = np.random.default_rng(config.seed)
    picks = sorted(rng.choice(len(train_set), size=min(args.batch, len(train_set)),
                              replace=False))
    coords, labels = stack_sequences([train_set[i] for i in picks])
    coords = coords[:, :args.frames]
    classes = max(s.label for s in train_set) + 1
    model = build_model(config, coords.shape[2], classes)
    tape, _, loss, nodes = model.build(coords, labels)
    report = finite_difference_check(tape, loss, sorted(nodes), model.tensors(),
                                     h=args.step, tol=args.tol,
                                     max_entries=args.max_entries, seed=config.seed)
    for name, entry in sorted(report.entries.items()):
        print("%-24s %.3e  (%s checked, %s skipped)" % (name, entry.error, entry.checked,
                                                        entry.skipped))
    _write_json(manifest, "gradcheck.json", report.as_dict())
    if not report.passed():
        raise SAPNumericError("Worst relative error %.3e exceeds %.1e, or a parameter had no "
                              "comparable entry." % (report.max_error(), args.tol))
    print("Worst relative error: %.3e (%s checked, %s skipped)"
          % (report.max_error(), report.checked(), report.skipped()))
    return 0


def command_export_anchors(args, reader, manifest):
    _, train_set, test_set = get_run_information(**args.run_kwargs)
    sequences = _split(args, train_set, test_set)
    if not 0 <= args.sample < len(sequences):
        raise SAPUsageError("Sample %s is out of range for %s sequences."
                            % (args.sample, len(sequences)))
    model = _model_for(args, reader, sequences)  # type: SAPModel
    seq = sequences[args.sample]
    if model.sap is not None:
        pairs = propose_anchor_pairs(seq, model.sap, model.pipeline.layout.root)
    else:
        pipeline = model.pipeline
        pairs = fixed_anchor_pairs(pipeline.layout, seq, pipeline.fixed_anchors,
                                   pipeline.fixed_pairing, pipeline.fixed_frame)
    path = os.path.join(args.run_dir, "anchors-%s-%d.json" % (args.split, args.sample))
    export_anchors(pairs, path, args.sample)
    manifest.add_artifact(path)
    return 0


def command_init_config(args, reader, manifest):
    generate_template(args.path, args.seed)
    print("Wrote %s" % args.path)
    return 0


def build_parser():
    # type: () -> argparse.ArgumentParser
    """Create the argument parser with every subcommand."""
    parser = _ArgumentParser(prog="sap-anchor",
                             description="Skeleton anchor proposal experiments.")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    parser.add_argument("--config", default="", help="run configuration file (TOML)")
    parser.add_argument("--run-dir", default="run", help="directory for outputs")
    parser.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        dest="overrides", help="override a configuration key")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")
    commands = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)

    commands.add_parser("gen-data", help="generate the synthetic dataset")

    parse = commands.add_parser("parse", help="convert NTU .skeleton files to a container")
    parse.add_argument("files", nargs="+")
    parse.add_argument("--frames", type=int, default=None,
                       help="resample every sequence to this many frames")
    parse.add_argument("--normalize", action="store_true",
                       help="move the first frame's root joint to the origin")
    parse.add_argument("--output", default="parsed.sapds")

    for name, helptext in (("featurize", "export fused features"),
                           ("eval", "evaluate a checkpoint"),
                           ("export-anchors", "export the anchors of one sample")):
        sub = commands.add_parser(name, help=helptext)
        sub.add_argument("--checkpoint", default=None)
        sub.add_argument("--split", choices=("train", "test"), default="test")
        if name == "featurize":
            sub.add_argument("--limit", type=int, default=None)
        if name == "export-anchors":
            sub.add_argument("--sample", type=int, default=0)

    train_cmd = commands.add_parser("train", help="train a model")
    train_cmd.add_argument("--resume", default=None, help="checkpoint to continue from")
    train_cmd.add_argument("--epochs", type=int, default=None)

    ablate = commands.add_parser("ablate", help="run an ablation sweep")
    ablate.add_argument("--axis", choices=sorted(ARMS), required=True)
    ablate.add_argument("--seeds", default="1,2,3")
    ablate.add_argument("--arms", default=None, help="comma-separated arms to run")
    ablate.add_argument("--epochs", type=int, default=None)

    gradcheck = commands.add_parser("gradcheck", help="check gradients by finite differences")
    gradcheck.add_argument("--batch", type=int, default=2)
    gradcheck.add_argument("--step", type=float, default=1e-5)
    gradcheck.add_argument("--tol", type=float, default=1e-4)
    gradcheck.add_argument("--max-entries", type=int, default=24)
    gradcheck.add_argument("--frames", type=int, default=4)
    gradcheck.add_argument("--hidden", type=int, default=6)

    init = commands.add_parser("init-config", help="write a commented default configuration")
    init.add_argument("path")
    init.add_argument("--seed", type=int, default=None)

    for sub in (gradcheck, train_cmd, ablate):
        sub.add_argument("--variant", choices=("V1", "V2", "V3"), default=None)
        sub.add_argument("--heads", type=int, default=None)
        sub.add_argument("--seed", type=int, default=None)
        sub.add_argument("--streams", default=None,
                         help="comma-separated streams, e.g. coords,angles-sap")
    return parser


def _flag_overrides(args):
    overrides = []
    if getattr(args, "variant", None):
        overrides.append('sap.variant="%s"' % args.variant)
    if getattr(args, "heads", None) is not None:
        overrides.append("sap.heads=%d" % args.heads)
    if getattr(args, "seed", None) is not None and args.command != "init-config":
        overrides.extend(["train.seed=%d" % args.seed, "data.seed=%d" % args.seed])
    if getattr(args, "epochs", None) is not None:
        overrides.append("train.epochs=%d" % args.epochs)
    if getattr(args, "streams", None):
        names = [s.strip() for s in args.streams.split(",") if s.strip()]
        overrides.append("train.streams=[%s]" % ", ".join('"%s"' % s for s in names))
    return overrides


_HANDLERS = {
    "gen-data": command_gen_data,
    "parse": command_parse,
    "featurize": command_featurize,
    "train": command_train,
    "eval": command_eval,
    "ablate": command_ablate,
    "gradcheck": command_gradcheck,
    "export-anchors": command_export_anchors,
    "init-config": command_init_config,
}


def _configure_logging(args):
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def cli_dispatch(argv):
    # type: (list) -> int
    """Run one subcommand.

    Arguments:
        argv (list): The command-line arguments, without the program name.

    Returns:
        code (int): The exit code.
    """
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise SAPUsageError("sap-anchor: a subcommand is required (%s)."
                                % ", ".join(COMMANDS))
    except SAPUsageError as error:
        sys.stderr.write("%s\n" % error)
        return error.exit_code

    _configure_logging(args)
    try:
        if args.command == "init-config":
            return command_init_config(args, None, None)
        overrides = list(args.overrides) + _flag_overrides(args)
        args.run_kwargs = {"config_file": args.config, "overrides": overrides}
        reader = get_run_information(with_data=False, **args.run_kwargs)[0]
        os.makedirs(args.run_dir, exist_ok=True)
        manifest = RunManifest(args.run_dir, args.command, reader.snapshot(),
                               reader.train["seed"], __version__, argv)
        manifest.write()
        return _HANDLERS[args.command](args, reader, manifest)
    except SAPError as error:
        _LOG.error("%s", error)
        return error.exit_code
    except (IOError, OSError) as error:
        _LOG.error("%s", error)
        return 2


def main():
    """Run the command line with the process arguments and exit with its code."""
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
