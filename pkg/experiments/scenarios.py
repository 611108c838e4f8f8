# experiments/scenarios.py

from dataclasses import dataclass

from errors import ConfigError
from models.model_spec import AdversarySpec

METRICS = ('U(M)', 'U(F)', 'U', 'L', 'P', 'MI')
STANDARD_METRICS = ('U(M)', 'U(F)', 'U', 'L', 'P')
MEMBERSHIP_METRICS = ('MI',)


@dataclass(frozen=True)
class Setup:
    """One report row: a model variant and the metrics measured for it"""
    spec: object
    metrics: tuple

    @property
    def lam(self):
        return max((a.lam for a in self.spec.adversaries), default=0.0) if self.spec.mode == 'Priv' else 0.0

    @property
    def adversary_targets(self):
        return tuple(a.target for a in self.spec.adversaries)

    @property
    def label(self):
        s = self.spec
        return (f"{s.modality}/{s.task}/{s.mode}/lam={self.lam:g}/{s.grl_placement}/"
                f"{'+'.join(self.adversary_targets) or 'none'}")

    def key(self):
        s = self.spec
        return {
            'modality': s.modality,
            'task': s.task,
            'mode': s.mode,
            'lambda': self.lam,
            'placement': s.grl_placement,
            'adversaries': list(self.adversary_targets),
        }

    def needs_standard_layout(self):
        return any(m in STANDARD_METRICS for m in self.metrics)

    def needs_membership_layout(self):
        return 'MI' in self.metrics


@dataclass(frozen=True)
class Comparison:
    """Paired-by-fold comparison of treatment[metric] against control[control_metric]"""
    metric: str
    treatment: str
    control: str
    task: str
    control_metric: str = None
    italic_on_decrease: bool = False

    @property
    def against_metric(self):
        return self.control_metric or self.metric

    @property
    def label(self):
        return f"{self.metric}: {self.treatment} vs {self.control}" + (
            f" [{self.against_metric}]" if self.control_metric else "")

    def to_dict(self):
        return {
            'metric': self.metric,
            'treatment': self.treatment,
            'control': self.control,
            'control_metric': self.against_metric,
            'task': self.task,
        }


def _variant(template, modality, task, mode, adversaries, placement='post-concat'):
    return template.with_updates(modality=modality, task=task, mode=mode,
                                 adversaries=tuple(adversaries), grl_placement=placement)


def _gen(template, modality, task):
    return _variant(template, modality, task, 'Gen', [AdversarySpec('gender', 0.0)])


def _priv(template, modality, task, lam, targets=('gender',), placement='post-concat'):
    return _variant(template, modality, task, 'Priv', [AdversarySpec(t, lam) for t in targets], placement)


def _gen_vs_priv(config, metrics, compared, lambdas, targets=('gender',), italic_metrics=()):
    setups, comparisons = [], []
    for task in config.tasks:
        for modality in config.modalities:
            gen = Setup(_gen(config.model, modality, task), metrics)
            setups.append(gen)
            for lam in lambdas:
                priv = Setup(_priv(config.model, modality, task, lam, targets), metrics)
                setups.append(priv)
                for metric in compared:
                    comparisons.append(Comparison(metric, priv.label, gen.label, task,
                                                  italic_on_decrease=metric in italic_metrics))
    return setups, comparisons


def _leakage(config):
    setups, comparisons = [], []
    order = [m for m in ('multimodal', 'acoustic', 'lexical') if m in config.modalities]
    for task in config.tasks:
        rows = {m: Setup(_gen(config.model, m, task), STANDARD_METRICS) for m in config.modalities}
        setups.extend(rows[m] for m in config.modalities)
        for higher, lower in zip(order, order[1:]):
            comparisons.append(Comparison('L', rows[higher].label, rows[lower].label, task))
    return setups, comparisons


def _per_gender(config):
    setups, comparisons = _gen_vs_priv(config, STANDARD_METRICS, ('U(M)', 'U(F)'), config.lambdas[:1])
    for setup in setups:
        comparisons.append(Comparison('U(F)', setup.label, setup.label, setup.spec.task, control_metric='U(M)'))
    return setups, comparisons


def _placement(config):
    setups, comparisons = [], []
    lam = config.lambdas[0]
    for task in config.tasks:
        gen = Setup(_gen(config.model, 'multimodal', task), STANDARD_METRICS)
        post = Setup(_priv(config.model, 'multimodal', task, lam), STANDARD_METRICS)
        per_stream = Setup(_priv(config.model, 'multimodal', task, lam, placement='per-stream'), STANDARD_METRICS)
        setups.extend([gen, post, per_stream])
        for metric in ('P', 'U'):
            comparisons.append(Comparison(metric, per_stream.label, post.label, task))
        comparisons.append(Comparison('P', per_stream.label, gen.label, task))
    return setups, comparisons


def build_scenario(config):
    """(setups, comparisons) for the configured scenario"""
    name = config.scenario
    if name == 'q1-leakage':
        return _leakage(config)
    if name == 'q2-privacy':
        return _gen_vs_priv(config, STANDARD_METRICS, ('P',), config.lambdas[:1])
    if name == 'q3-utility':
        return _gen_vs_priv(config, STANDARD_METRICS, ('U',), config.lambdas[:1])
    if name == 'q4-lambda-sweep':
        return _gen_vs_priv(config, STANDARD_METRICS, ('P', 'U'), config.lambdas)
    if name == 'q5-per-gender':
        return _per_gender(config)
    if name == 'q6-placement':
        return _placement(config)
    if name == 'q7-membership':
        return _gen_vs_priv(config, ('U', 'MI'), ('MI', 'U'), config.lambdas[:1], targets=('speaker',))
    if name == 'q7-multi':
        return _gen_vs_priv(config, ('U(M)', 'U(F)', 'U', 'P', 'MI'), ('P', 'MI', 'U'), config.lambdas[:1],
                            targets=('gender', 'speaker'), italic_metrics=('U',))
    raise ConfigError(f"Unknown scenario '{name}'")
