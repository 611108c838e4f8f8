# experiments/runner.py

import json
import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass, replace

import numpy as np

from attack_modules.membership_attack import membership_attack
from attack_modules.privacy_attack import privacy_metric
from corpus_modules.corpus_generator import generate_corpus
from corpus_modules.corpus_splits import (ROLE_TEST, ROLE_TRAIN, ROLE_VALIDATION, make_folds,
                                          make_mi_splits)
from errors import PrivacyLabError, StageError
from experiments.experiment_config import N_FOLDS, load_experiment_config
from experiments.report import MetricsReport, ReportRow, emit_table, validate_report
from experiments.scenarios import METRICS, build_scenario
from models.sample import EMOTION_CLASSES
from queue_manager import RunQueueManager
from stats_modules.metrics import leakage, per_group_uar, uar
from stats_modules.significance import bh_adjust, paired_t_test
from training_modules.grid_search import enumerate_grid, grid_search
from training_modules.selection import chance_indices, gender_head, seed_ensemble
from training_modules.trainer import train
from utils import canonical_json
from utils.rng import derive_seed
from workers.experiment_worker import resolve_worker_count, run_all

logger = logging.getLogger(__name__)

LAYOUT_STANDARD = 'standard'
LAYOUT_MEMBERSHIP = 'membership'


@contextmanager
def stage(name, config_hash):
    """Re-raise any failure as a StageError carrying the stage name and config hash"""
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        raise StageError(name, config_hash, e) from e


@dataclass
class RunContext:
    config: object
    config_hash: str
    corpus: list
    attacker_samples: list = None


def _offset_ids(samples, speaker_offset, utterance_offset):
    return [replace(s, speaker_id=s.speaker_id + speaker_offset,
                    utterance_id=s.utterance_id + utterance_offset) for s in samples]


def build_context(config):
    config_hash = config.config_hash()
    with stage('corpus', config_hash):
        corpus = generate_corpus(config.effective_generator())
        attacker_samples = None
        attacker_cfg = config.attacker_generator()
        if attacker_cfg is not None:
            attacker_samples = _offset_ids(generate_corpus(attacker_cfg),
                                           max(s.speaker_id for s in corpus) + 1,
                                           max(s.utterance_id for s in corpus) + 1)
    return RunContext(config=config, config_hash=config_hash, corpus=corpus, attacker_samples=attacker_samples)


def _mean(values):
    return float(np.mean(values)) if values else None


def run_standard_fold(context, spec, metrics, rotation):
    """U, U(M), U(F) from the seed ensemble on the test fold; L and P averaged over seed models.

    Priv ensembles only keep the seeds whose gender adversary is at chance on validation.
    """
    cfg, corpus, master = context.config, context.corpus, context.config.master_seed
    with stage('folds', context.config_hash):
        plan = make_folds(corpus, N_FOLDS, seed=master, layout=LAYOUT_STANDARD, rotation=rotation)
        train_samples = plan.samples_with(corpus, ROLE_TRAIN)
        val_samples = plan.samples_with(corpus, ROLE_VALIDATION)
        test_samples = plan.samples_with(corpus, ROLE_TEST)
    with stage('train', context.config_hash):
        ensemble = seed_ensemble(spec, train_samples, val_samples, test_samples, cfg.training,
                                 base_seed=master, run_key=('fold', rotation))
    with stage('select', context.config_hash):
        ensemble = ensemble.restricted(chance_indices(zip(ensemble.models, ensemble.histories), cfg.training))
    values = {}
    with stage('metrics', context.config_hash):
        labels = np.array([s.emotion_index(spec.task) for s in test_samples])
        genders = [s.gender for s in test_samples]
        values['U'] = uar(ensemble.predictions, labels, len(EMOTION_CLASSES))
        values['U(M)'], values['U(F)'] = per_group_uar(ensemble.predictions, labels, genders,
                                                       len(EMOTION_CLASSES))
        if 'L' in metrics and gender_head(ensemble.models[0]) is not None:
            values['L'] = _mean([leakage(model, val_samples) for model in ensemble.models])
    if 'P' in metrics:
        with stage('attack', context.config_hash):
            values['P'] = _mean([
                privacy_metric(model, corpus, plan, cfg.training,
                               seed=derive_seed(master, 'probe', rotation, seed), probe_grid=cfg.probe_grid,
                               attacker_samples=context.attacker_samples).metric
                for seed, model in zip(ensemble.seeds, ensemble.models)])
    return values


def run_membership_fold(context, spec, rotation):
    """MI averaged over the seed models (at chance, for Priv) trained on D1 plus the moved-in s4/s5 samples"""
    cfg, corpus, master = context.config, context.corpus, context.config.master_seed
    with stage('folds', context.config_hash):
        plan = make_folds(corpus, N_FOLDS, seed=master, layout=LAYOUT_MEMBERSHIP, rotation=rotation)
        mi = make_mi_splits(plan, corpus, cfg.membership.select_fraction, cfg.membership.move_fraction,
                            seed=derive_seed(master, 'mi', rotation))
        train_samples = plan.samples_with(corpus, ROLE_TRAIN) + mi.injected_samples(corpus)
        val_samples = plan.samples_with(corpus, ROLE_VALIDATION)
        training_ids = {s.utterance_id for s in train_samples}
    candidates = []
    for seed in cfg.training.seeds:
        with stage('train', context.config_hash):
            candidates.append(train(spec, train_samples, val_samples, cfg.training,
                                    derive_seed(master, 'mi-fold', rotation, seed)))
    with stage('select', context.config_hash):
        kept = chance_indices(candidates, cfg.training)
    scores = []
    for index in kept:
        seed, (model, _) = cfg.training.seeds[index], candidates[index]
        with stage('mi', context.config_hash):
            result = membership_attack(model, corpus, mi, plan, training_ids, cfg.training,
                                       seed=derive_seed(master, 'mi-probe', rotation, seed),
                                       probe_grid=cfg.probe_grid)
        scores.append(result.metric)
    return {'MI': _mean(scores)}


def make_handler(context, specs):
    def handle(job):
        setup = job['setup']
        spec = specs[setup.label]
        if job['layout'] == LAYOUT_MEMBERSHIP:
            return run_membership_fold(context, spec, job['rotation'])
        return run_standard_fold(context, spec, setup.metrics, job['rotation'])
    return handle


def resolve_specs(context, setups):
    """Fixed specs, or the grid-search winner on rotation 0 of each setup"""
    cfg = context.config
    specs = {}
    for setup in setups:
        if not cfg.grid_search:
            specs[setup.label] = setup.spec
            continue
        with stage('grid', context.config_hash):
            plan = make_folds(context.corpus, N_FOLDS, seed=cfg.master_seed, layout=LAYOUT_STANDARD, rotation=0)
            candidates = enumerate_grid(setup.spec, lambdas=(setup.lam,) if setup.spec.mode == 'Priv' else ())
            if setup.spec.mode == 'Priv':
                candidates = [c for c in candidates if c.grl_placement == setup.spec.grl_placement]
            if cfg.grid_limit:
                candidates = candidates[:cfg.grid_limit]
            result = grid_search(candidates, plan.samples_with(context.corpus, ROLE_TRAIN),
                                 plan.samples_with(context.corpus, ROLE_VALIDATION), cfg.training,
                                 seed=derive_seed(cfg.master_seed, 'grid', setup.label))
            specs[setup.label] = result.best
    return specs


def fold_jobs(setups):
    jobs = []
    for setup in setups:
        for rotation in range(N_FOLDS):
            if setup.needs_standard_layout():
                jobs.append({'key': (setup.label, LAYOUT_STANDARD, rotation), 'setup': setup,
                             'layout': LAYOUT_STANDARD, 'rotation': rotation})
            if setup.needs_membership_layout():
                jobs.append({'key': (setup.label, LAYOUT_MEMBERSHIP, rotation), 'setup': setup,
                             'layout': LAYOUT_MEMBERSHIP, 'rotation': rotation})
    return jobs


def collect_rows(setups, results):
    """Per-fold arrays per setup and metric from (key, values) pairs sorted by key"""
    folds = {setup.label: {m: [None] * N_FOLDS for m in METRICS} for setup in setups}
    for (label, _layout, rotation), values in results:
        for metric, value in values.items():
            folds[label][metric][rotation] = value
    rows = []
    for setup in setups:
        per_fold = {}
        for metric in METRICS:
            series = folds[setup.label][metric]
            per_fold[metric] = series if all(v is not None for v in series) else None
        rows.append(ReportRow(label=setup.label, key=setup.key(), per_fold=per_fold))
    return rows


def _family(comparison, bh_family):
    if bh_family == 'metric':
        return comparison.metric
    if bh_family == 'task':
        return comparison.task
    return 'scenario'


def apply_significance(report, comparisons, config):
    """Paired t-tests per comparison, BH-adjusted per family, marked on the treatment cell"""
    tested = []
    for comparison in comparisons:
        treatment = report.row(comparison.treatment).per_fold.get(comparison.metric)
        control = report.row(comparison.control).per_fold.get(comparison.against_metric)
        if treatment is None or control is None:
            logger.warning(f"[STATS] Skipping {comparison.label}: metric not measured")
            continue
        tested.append((comparison, paired_t_test(treatment, control)))

    families = {}
    for comparison, result in tested:
        families.setdefault(_family(comparison, config.bh_family), []).append((comparison, result))

    for name in sorted(families):
        members = families[name]
        significance = bh_adjust([r.pvalue for _, r in members], alpha=config.alpha,
                                 labels=[c.label for c, _ in members])
        report.families.append({'family': name, **significance.to_dict()})
        for (comparison, result), adjusted, reject in zip(members, significance.adjusted, significance.reject):
            italic = comparison.italic_on_decrease and reject and result.mean_difference < 0
            row = report.row(comparison.treatment)
            mark = row.marks.setdefault(comparison.metric, {'bold': False, 'italic': False})
            mark['bold'] = mark['bold'] or (reject and not italic)
            mark['italic'] = mark['italic'] or italic
            report.comparisons.append({
                **comparison.to_dict(),
                'family': name,
                't_test': result.to_dict(),
                'adjusted_pvalue': adjusted,
                'reject': reject,
                'italic': italic,
            })
    return report


def write_report(report, output_dir):
    text = canonical_json(report.to_dict(), indent=2)
    validate_report(json.loads(text))
    os.makedirs(output_dir, exist_ok=True)
    with open(os.path.join(output_dir, 'report.json'), 'w', encoding='utf-8') as f:
        f.write(text + '\n')
    with open(os.path.join(output_dir, 'report.md'), 'w', encoding='utf-8') as f:
        f.write(emit_table(report))
    report.folds_frame().to_csv(os.path.join(output_dir, 'folds.csv'), index=False)
    logger.info(f"[EXPERIMENT] Wrote report.json, report.md and folds.csv to {output_dir}")


def run_config(config, num_workers=None):
    """Run one validated ExperimentConfig and write its artefacts"""
    num_workers = resolve_worker_count(num_workers)
    context = build_context(config)
    logger.info(f"[EXPERIMENT] Scenario {config.scenario} (config {context.config_hash[:12]}), "
                f"master seed {config.master_seed}")
    with stage('scenario', context.config_hash):
        setups, comparisons = build_scenario(config)
    specs = resolve_specs(context, setups)

    jobs = fold_jobs(setups)
    logger.info(f"[EXPERIMENT] {len(setups)} setups, {len(jobs)} fold runs")
    results, errors = run_all(RunQueueManager(), make_handler(context, specs), jobs, num_workers)
    if errors:
        key, error = errors[0]
        logger.error(f"[EXPERIMENT] {len(errors)} run(s) failed; first: {key}")
        if isinstance(error, StageError):
            raise error
        raise StageError('run', context.config_hash, error)

    with stage('stats', context.config_hash):
        report = MetricsReport(scenario=config.scenario, config_hash=context.config_hash,
                               config=config.to_dict(), rows=collect_rows(setups, results))
        apply_significance(report, comparisons, config)
    with stage('report', context.config_hash):
        write_report(report, config.output_dir)
    return report


def run_experiment(config_path, seed=None, output_dir=None, num_workers=None):
    """Load a JSON config, apply CLI overrides and run it"""
    try:
        config = load_experiment_config(config_path).with_overrides(seed=seed, output_dir=output_dir)
    except PrivacyLabError as e:
        raise StageError('config', 'unknown', e) from e
    return run_config(config, num_workers)
