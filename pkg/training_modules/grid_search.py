# training_modules/grid_search.py

import itertools
import logging
from dataclasses import dataclass, field

from errors import ConfigError
from models.model_spec import HYPERPARAMETER_GRID, PLACEMENTS, PRIV_LAMBDAS, AdversarySpec
from training_modules.selection import CHANCE_UAR, adversary_val_uar
from training_modules.trainer import train

logger = logging.getLogger(__name__)


def enumerate_grid(base, lambdas=PRIV_LAMBDAS, grid=None):
    """Every layer combination of the grid; Priv specs also vary lambda (and placement when multimodal)"""
    grid = grid or HYPERPARAMETER_GRID
    names = sorted(grid)
    if base.mode == 'Priv':
        lambda_axis = tuple(lambdas)
        placement_axis = PLACEMENTS if base.modality == 'multimodal' else (base.grl_placement,)
    else:
        lambda_axis = (None,)
        placement_axis = (base.grl_placement,)

    specs = []
    for values in itertools.product(*(grid[n] for n in names), lambda_axis, placement_axis):
        *layer_values, lam, placement = values
        changes = dict(zip(names, layer_values), grl_placement=placement)
        if lam is not None:
            changes['adversaries'] = tuple(AdversarySpec(a.target, lam) for a in base.adversaries)
        specs.append(base.with_updates(**changes))
    logger.info(f"[GRID] {len(specs)} candidate specs for {base.modality}/{base.task}/{base.mode}")
    return specs


def ranking_score(params, history):
    """Priv: val emotion UAR minus distance of val adversary UAR from chance. Gen: val emotion UAR"""
    emotion = history.best_val_uar('emotion') or 0.0
    if params.spec.mode != 'Priv':
        return emotion
    adversary = adversary_val_uar(params, history)
    return emotion if adversary is None else emotion - abs(adversary - CHANCE_UAR)


@dataclass
class GridResult:
    best: object
    ranking: list = field(default_factory=list)

    def to_dict(self):
        return {'best': self.best.to_dict(), 'ranking': self.ranking}


def grid_search(specs, train_samples, val_samples, cfg, seed=0, trainer=train):
    """Train every spec once and rank on validation.

    Every candidate is ranked, Priv ones penalised by how far their adversary
    sits from chance. Ties are broken by smaller parameter count, then by the
    ModelSpec key.
    """
    specs = list(specs)
    if not specs:
        raise ConfigError("Grid search over an empty grid")
    trained = [(spec,) + tuple(trainer(spec, train_samples, val_samples, cfg, seed)) for spec in specs]
    scored = sorted(((spec, params, ranking_score(params, history)) for spec, params, history in trained),
                    key=lambda item: (-item[2], item[1].parameter_count(), item[0].key()))
    ranking = [{'spec': spec.to_dict(), 'score': score, 'parameter_count': params.parameter_count()}
               for spec, params, score in scored]
    best = scored[0][0]
    logger.info(f"[GRID] Best of {len(specs)}: score {scored[0][2]:.4f}, {best.key()}")
    return GridResult(best=best, ranking=ranking)
