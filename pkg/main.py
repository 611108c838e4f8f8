import argparse
import json
import logging
import os
import sys

from corpus_modules.corpus_generator import generate_corpus
from corpus_modules.corpus_io import load_corpus, save_corpus
from corpus_modules.corpus_splits import ROLE_TRAIN, ROLE_VALIDATION, make_folds, make_mi_splits
from errors import ConfigError, PrivacyLabError
from experiments.experiment_config import N_FOLDS, ExperimentConfig, load_experiment_config
from experiments.report import MetricsReport, emit_table, validate_report
from experiments.runner import run_config
from models.checkpoint import load_checkpoint, save_checkpoint
from training_modules.trainer import train
from attack_modules.membership_attack import membership_attack
from attack_modules.privacy_attack import privacy_metric
from utils import canonical_json
from utils.logging_setup import setup_logging
from utils.rng import derive_seed

logger = logging.getLogger(__name__)


def load_config(args):
    """Experiment config from --config (or defaults) with --seed / --out applied"""
    config = load_experiment_config(args.config) if args.config else ExperimentConfig()
    return config.with_overrides(seed=args.seed, output_dir=args.out)


def load_or_generate(config, corpus_dir=None):
    if corpus_dir:
        return load_corpus(corpus_dir)
    return generate_corpus(config.effective_generator())


def write_json(data, path):
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(canonical_json(data, indent=2) + '\n')
    logger.info(f"[CLI] Wrote {path}")


def attack_key(args, spec, attack):
    return {
        'dataset': os.path.basename(os.path.normpath(args.corpus)) if args.corpus else 'synthetic',
        'modality': spec.modality,
        'task': spec.task,
        'mode': spec.mode,
        'lambda': max((a.lam for a in spec.adversaries), default=0.0) if spec.mode == 'Priv' else 0.0,
        'attack': attack,
    }


def cmd_gen_data(args):
    config = load_config(args)
    corpus = generate_corpus(config.effective_generator())
    directory = os.path.join(config.output_dir, 'corpus')
    save_corpus(corpus, directory, metadata={'generator': config.effective_generator().to_dict()})
    return directory


def cmd_train(args):
    config = load_config(args)
    corpus = load_or_generate(config, args.corpus)
    plan = make_folds(corpus, N_FOLDS, seed=config.master_seed, rotation=args.fold)
    seed = derive_seed(config.master_seed, 'cli-train', args.fold)
    params, history = train(config.model, plan.samples_with(corpus, ROLE_TRAIN),
                            plan.samples_with(corpus, ROLE_VALIDATION), config.training, seed)
    directory = os.path.join(config.output_dir, 'checkpoint')
    save_checkpoint(params, directory)
    with open(os.path.join(config.output_dir, 'history.jsonl'), 'w', encoding='utf-8') as f:
        f.write(history.to_jsonl())
    logger.info(f"[CLI] Best epoch {history.best_epoch} ({history.stop_reason})")
    return directory


def cmd_attack(args):
    config = load_config(args)
    if not args.checkpoint:
        raise ConfigError("attack needs --checkpoint")
    model = load_checkpoint(args.checkpoint)
    corpus = load_or_generate(config, args.corpus)
    plan = make_folds(corpus, N_FOLDS, seed=config.master_seed, rotation=args.fold)
    result = privacy_metric(model, corpus, plan, config.training,
                            seed=derive_seed(config.master_seed, 'cli-probe', args.fold),
                            probe_grid=config.probe_grid)
    result.key = attack_key(args, model.spec, result.attack)
    path = os.path.join(config.output_dir, 'attack.json')
    write_json(result.to_dict(), path)
    return path


def cmd_mi(args):
    """Train on D1 plus the moved-in samples, then attack membership"""
    config = load_config(args)
    corpus = load_or_generate(config, args.corpus)
    plan = make_folds(corpus, N_FOLDS, seed=config.master_seed, layout='membership', rotation=args.fold)
    mi = make_mi_splits(plan, corpus, config.membership.select_fraction, config.membership.move_fraction,
                        seed=derive_seed(config.master_seed, 'mi', args.fold))
    train_samples = plan.samples_with(corpus, ROLE_TRAIN) + mi.injected_samples(corpus)
    model, _ = train(config.model, train_samples, plan.samples_with(corpus, ROLE_VALIDATION),
                     config.training, derive_seed(config.master_seed, 'cli-mi', args.fold))
    result = membership_attack(model, corpus, mi, plan, {s.utterance_id for s in train_samples},
                               config.training, seed=derive_seed(config.master_seed, 'cli-mi-probe', args.fold),
                               probe_grid=config.probe_grid)
    result.key = attack_key(args, model.spec, result.attack)
    path = os.path.join(config.output_dir, 'mi.json')
    write_json(result.to_dict(), path)
    return path


def cmd_experiment(args):
    if not args.config:
        raise ConfigError("experiment needs --config")
    report = run_config(load_config(args), args.workers)
    return report.config_hash


def cmd_report(args):
    """Re-emit report.md from an existing report.json"""
    directory = args.out or args.run
    if not directory:
        raise ConfigError("report needs --out (the run directory)")
    path = os.path.join(directory, 'report.json')
    if not os.path.isfile(path):
        raise ConfigError(f"No report.json in {directory}")
    with open(path, encoding='utf-8') as f:
        report = MetricsReport.from_dict(validate_report(json.load(f)))
    with open(os.path.join(directory, 'report.md'), 'w', encoding='utf-8') as f:
        f.write(emit_table(report))
    return os.path.join(directory, 'report.md')


COMMANDS = {
    'gen-data': cmd_gen_data,
    'train': cmd_train,
    'attack': cmd_attack,
    'mi': cmd_mi,
    'experiment': cmd_experiment,
    'report': cmd_report,
}


def build_parser():
    parser = argparse.ArgumentParser(description='Adversarial privacy experiments for multimodal emotion recognition')
    sub = parser.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument('--config', help='experiment config JSON')
        p.add_argument('--seed', type=int, help='override the master seed')
        p.add_argument('--out', help='output directory')
        if name in ('train', 'attack', 'mi'):
            p.add_argument('--corpus', help='corpus directory written by gen-data')
            p.add_argument('--fold', type=int, default=0, choices=range(N_FOLDS), help='fold rotation')
        if name == 'attack':
            p.add_argument('--checkpoint', help='checkpoint directory written by train')
        if name == 'experiment':
            p.add_argument('--workers', type=int, help='worker threads (default from environment)')
        if name == 'report':
            p.add_argument('--run', help='run directory holding report.json')
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging()
    try:
        output = COMMANDS[args.command](args)
    except PrivacyLabError as e:
        logger.error(f"[CLI] {args.command} failed: {e}")
        return 1
    logger.info(f"[CLI] {args.command} done: {output}")
    return 0


if __name__ == '__main__':
    sys.exit(main())
