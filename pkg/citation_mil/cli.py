"""
Command-line entry point.

    python -m citation_mil ingest clean1.data --out out/
    python -m citation_mil optimize out/dataset.json --out out/ --jobs 8
    python -m citation_mil stack out/dataset.json out/cnn_front.json --out out/
    python -m citation_mil evaluate out/dataset.json out/cnn_front.json out/
    python -m citation_mil predict out/models/stack_model_000.json out/dataset.json 188 ...

Results go to stdout; progress and errors go to stderr and to
``<out>/run_log.txt``.
"""

import argparse
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from .cnn import CnnParams
from .config import apply_overrides, config_digest, load_config
from .errors import ConfigError, MilError
from .genome import evolve, front_entries
from .ingest import (
    apply_normalization,
    dataset_summary,
    load_any_dataset,
    load_bags_json,
    normalize_minmax,
    save_dataset_json,
)
from .bags import Dataset
from .nsga2 import hypervolume
from .reports import (
    artifact_meta,
    best_balanced,
    front_document,
    read_front,
    read_json,
    write_front_table,
    write_json,
)
from .stacking import (
    MetaDataset,
    StackedModel,
    assemble_model,
    build_meta_dataset,
    majority_vote,
    predict_bag,
    stack_entries,
    tune_stack,
)
from .validation import ValidationScheme

logger = logging.getLogger("citation_mil")

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


def setup_logging(out_dir=None, verbose=False):
    handlers = [logging.StreamHandler()]
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        handlers.insert(0, logging.FileHandler(Path(out_dir) / "run_log.txt"))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def _dataset_path(args, config):
    path = getattr(args, "dataset", None) or config.dataset
    if path is None:
        raise ConfigError("no dataset given on the command line or in the config file")
    return Path(path)


def _load_training(path, config):
    data = load_any_dataset(path)
    if config.normalize and data.normalization is None:
        data = normalize_minmax(data)
    return data


def _meta(config):
    return artifact_meta(config.seed, config_digest(config))


def _scheme_from(document, fallback):
    raw = document.get("validation") if isinstance(document, dict) else None
    if not raw:
        return fallback
    return ValidationScheme(raw.get("kind", "loo"), raw.get("k", 0), raw.get("seed", 0))


def cmd_ingest(args, config):
    """Parse (and by default min-max scale) a dataset into ``<out>/dataset.json``."""
    data = load_any_dataset(args.path)
    summary = dataset_summary(data)
    if config.normalize and not args.no_normalize:
        data = normalize_minmax(data)
    save_dataset_json(data, Path(config.out_dir) / "dataset.json", _meta(config))
    print(summary)


def cmd_optimize(args, config):
    """Run the CNN search and write the front file and its table."""
    train = _load_training(_dataset_path(args, config), config)
    scheme = config.validation.resolve(len(train))
    settings = config.cnn_search
    front = evolve(train, settings, config.stage_seed(settings), args.jobs, scheme)
    entries = front_entries(front, train, scheme)

    out = Path(config.out_dir)
    document = front_document(entries, _meta(config))
    document["validation"] = scheme.to_dict()
    write_json(document, out / "cnn_front.json")
    table = write_front_table(entries, out / "cnn_front_table", _meta(config))
    logger.info(f"📊 CNN front:\n{table.to_string(index=False)}")


def cmd_stack(args, config):
    """Build T2 from a front file, tune the combiner and write one model per stack solution."""
    train = _load_training(_dataset_path(args, config), config)
    front_path = Path(args.front)
    entries = read_front(front_path)
    scheme = _scheme_from(read_json(front_path), config.validation.resolve(len(train)))
    members = [CnnParams.from_dict(entry["params"]) for entry in entries]
    for params in members:
        params.features.check(train.dimensionality)

    meta = build_meta_dataset(train, members, scheme, config.use_scores, args.jobs)
    out = Path(config.out_dir)
    write_json({"meta": _meta(config), **meta.to_dict()}, out / "meta_dataset.json")

    settings = config.stack_search
    stack_front = tune_stack(meta, settings, config.stage_seed(settings), args.jobs)
    stack_rows = stack_entries(stack_front)
    document = front_document(stack_rows, _meta(config))
    document["optimistic_estimate"] = True
    write_json(document, out / "stack_front.json")
    table = write_front_table(stack_rows, out / "stack_front_table", _meta(config))
    logger.info(f"📊 Stacked front:\n{table.to_string(index=False)}")

    for k, member in enumerate(stack_front):
        model = assemble_model(meta, member.genome, train.normalization, settings)
        write_json(model.to_dict(meta=_meta(config)), out / "models" / f"stack_model_{k:03d}.json")
    logger.info(f"✅ Wrote {len(stack_front)} stacked models to {out / 'models'}")


def _objective_points(entries):
    return [(float(e["acc_pos"]), float(e["acc_neg"])) for e in entries]


def cmd_evaluate(args, config):
    """Compare the CNN front, the stacked front and plain majority voting."""
    data = load_any_dataset(_dataset_path(args, config))
    cnn_entries = read_front(args.front)
    stack_dir = Path(args.stack_dir)
    stack_rows = read_front(stack_dir / "stack_front.json")
    meta = MetaDataset.from_dict(read_json(stack_dir / "meta_dataset.json"))
    if meta.bag_ids != tuple(bag.id for bag in data.bags):
        raise ConfigError(f"{stack_dir / 'meta_dataset.json'} was built from a different dataset")

    cnn_hv = hypervolume(_objective_points(cnn_entries))
    stack_hv = hypervolume(_objective_points(stack_rows))
    vote_pos, vote_neg, _ = majority_vote(meta)
    report = {
        "meta": _meta(config),
        "cnn_hypervolume": cnn_hv,
        "stack_hypervolume": stack_hv,
        "hypervolume_gain": stack_hv - cnn_hv,
        "majority_vote": {"acc_pos": vote_pos, "acc_neg": vote_neg},
        "best_balanced_cnn": best_balanced(cnn_entries),
        "best_balanced_stack": best_balanced(stack_rows),
        "stack_estimate_optimistic": True,
    }
    write_json(report, Path(config.out_dir) / "evaluation.json")

    print(f"CNN front hypervolume\t{cnn_hv:.4f}")
    print(f"Stacked front hypervolume\t{stack_hv:.4f}")
    print(f"Hypervolume gain\t{stack_hv - cnn_hv:+.4f}")
    print(f"Majority vote (Class 0 / Class 1)\t{100 * vote_neg:.2f}% / {100 * vote_pos:.2f}%")
    print("Stacked estimates are leave-one-out over fixed member columns (optimistic)")


def _prediction_bags(arguments, train, normalization):
    for argument in arguments:
        candidate = Path(argument)
        if candidate.suffix.lower() == ".json" and candidate.is_file():
            bags, normalized = load_bags_json(candidate)
            for bag in bags:
                if not normalized and normalization is not None:
                    bag = apply_normalization(bag, normalization)
                yield bag
            continue
        bag = train.bag_by_id(argument)
        if bag is None:
            raise ConfigError(f"unknown bag id {argument!r}")
        yield bag


def cmd_predict(args, config):
    """Print ``<bag-id>\\t<+1|-1>`` for every bag id or bag file, in input order."""
    model = StackedModel.from_dict(read_json(args.model))
    train = load_any_dataset(args.dataset)
    if train.normalization is None and model.normalization is not None:
        train = Dataset(
            tuple(apply_normalization(bag, model.normalization) for bag in train.bags),
            train.dimensionality,
            model.normalization,
        )
    for bag in _prediction_bags(args.bags, train, model.normalization):
        label = predict_bag(model, train, bag)
        print(f"{bag.id}\t{label:+d}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="global seed (overrides the config)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--kfold", type=int, help="stratified k-fold validation instead of LOO")
    common.add_argument("--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="citation_mil",
        description="Citation nearest neighbour ensembles for multi-instance data",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    ingest = commands.add_parser("ingest", parents=[common], help="parse and normalize a dataset")
    ingest.add_argument("path", help="Musk-format CSV or canonical dataset JSON")
    ingest.add_argument("--no-normalize", action="store_true", help="keep raw feature values")
    ingest.set_defaults(handler=cmd_ingest)

    optimize = commands.add_parser("optimize", parents=[common], help="NSGA-II search for CNN classifiers")
    optimize.add_argument("dataset", nargs="?", help="dataset file (default: from config)")
    optimize.set_defaults(handler=cmd_optimize)

    stack = commands.add_parser("stack", parents=[common], help="stack a CNN front with a kernel combiner")
    stack.add_argument("dataset", help="dataset file the front was trained on")
    stack.add_argument("front", help="cnn_front.json from optimize")
    stack.set_defaults(handler=cmd_stack)

    evaluate = commands.add_parser("evaluate", parents=[common], help="compare fronts and baselines")
    evaluate.add_argument("dataset")
    evaluate.add_argument("front", help="cnn_front.json")
    evaluate.add_argument("stack_dir", help="directory holding stack_front.json and meta_dataset.json")
    evaluate.set_defaults(handler=cmd_evaluate)

    predict = commands.add_parser("predict", parents=[common], help="classify bags with a stacked model")
    predict.add_argument("model", help="stack_model_XXX.json")
    predict.add_argument("dataset", help="training dataset of the model")
    predict.add_argument("bags", nargs="+", help="bag ids of the dataset or bag JSON files")
    predict.set_defaults(handler=cmd_predict)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(verbose=args.verbose)
    try:
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
        config = apply_overrides(load_config(args.config), seed=args.seed, out_dir=args.out, kfold=args.kfold)
        setup_logging(config.out_dir, args.verbose)
        logger.debug(f"Configuration digest {config_digest(config)}")
        args.handler(args, config)
    except (MilError, FileNotFoundError, ValidationError) as e:
        logger.error(f"❌ {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
