# experiments/report.py

import json
import os
from dataclasses import dataclass, field
from functools import lru_cache

import jsonschema
import numpy as np
import pandas as pd

from errors import ReportError
from experiments.scenarios import METRICS
from models.sample import TASKS

# Priv tables never report the jointly trained leakage head
PRIV_OMITTED = ('L',)

REPORT_SCHEMA_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'report_schema.json')


@lru_cache(maxsize=1)
def load_report_schema():
    with open(REPORT_SCHEMA_PATH, 'r', encoding='utf-8') as f:
        return json.load(f)


def validate_report(data):
    """Check parsed report.json content against the published schema"""
    try:
        jsonschema.validate(data, load_report_schema(), cls=jsonschema.Draft202012Validator)
    except jsonschema.ValidationError as e:
        location = '/'.join(str(p) for p in e.absolute_path) or '<root>'
        raise ReportError(f"Report does not match its schema at {location}: {e.message}")
    return data


@dataclass
class ReportRow:
    label: str
    key: dict
    per_fold: dict
    marks: dict = field(default_factory=dict)

    @property
    def values(self):
        return {m: (None if folds is None else float(np.mean(folds))) for m, folds in self.per_fold.items()}

    def to_dict(self):
        return {
            'label': self.label,
            'key': dict(self.key),
            'values': {m: self.values.get(m) for m in METRICS},
            'per_fold': {m: self.per_fold.get(m) for m in METRICS},
            'marks': {m: self.marks[m] for m in sorted(self.marks)},
        }

    @classmethod
    def from_dict(cls, data):
        return cls(label=data['label'], key=dict(data['key']), per_fold=dict(data['per_fold']),
                   marks=dict(data.get('marks', {})))


@dataclass
class MetricsReport:
    scenario: str
    config_hash: str
    config: dict
    rows: list = field(default_factory=list)
    comparisons: list = field(default_factory=list)
    families: list = field(default_factory=list)

    def row(self, label):
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)

    def to_dict(self):
        return {
            'scenario': self.scenario,
            'config_hash': self.config_hash,
            'config': self.config,
            'rows': [r.to_dict() for r in self.rows],
            'comparisons': self.comparisons,
            'families': self.families,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(scenario=data['scenario'], config_hash=data['config_hash'], config=data['config'],
                   rows=[ReportRow.from_dict(r) for r in data['rows']],
                   comparisons=list(data.get('comparisons', [])), families=list(data.get('families', [])))

    def folds_frame(self):
        """Long-format per-fold values (one line per row, metric and fold)"""
        records = []
        for row in self.rows:
            for metric in METRICS:
                folds = row.per_fold.get(metric)
                if folds is None:
                    continue
                for fold, value in enumerate(folds, start=1):
                    records.append({
                        'setup': row.label,
                        'modality': row.key['modality'],
                        'task': row.key['task'],
                        'mode': row.key['mode'],
                        'lambda': row.key['lambda'],
                        'placement': row.key['placement'],
                        'adversaries': '+'.join(row.key['adversaries']),
                        'metric': metric,
                        'fold': fold,
                        'value': value,
                    })
        columns = ['setup', 'modality', 'task', 'mode', 'lambda', 'placement', 'adversaries',
                   'metric', 'fold', 'value']
        return pd.DataFrame.from_records(records, columns=columns)


def _cell(row, metric):
    value = row.values.get(metric)
    if value is None:
        return '-'
    text = f"{value:.3f}"
    mark = row.marks.get(metric, {})
    if mark.get('italic'):
        return f"*{text}*"
    if mark.get('bold'):
        return f"**{text}**"
    return text


def _row_name(row):
    key = row.key
    name = key['modality']
    if key['mode'] == 'Priv':
        name += f" (lambda={key['lambda']:g}, {key['placement']}, {'+'.join(key['adversaries'])})"
    return name


def _columns(rows, mode, notes):
    columns = []
    for metric in METRICS:
        if mode == 'Priv' and metric in PRIV_OMITTED:
            continue
        if all(r.values.get(metric) is None for r in rows):
            notes.append(f"{metric} not measured for {mode} rows in this scenario; column omitted.")
            continue
        columns.append(metric)
    return columns


def _simple_table(title, rows, notes):
    mode = rows[0].key['mode']
    columns = _columns(rows, mode, notes)
    lines = [f"### {title}", '', '| Setup | ' + ' | '.join(columns) + ' |',
             '|---|' + '---|' * len(columns)]
    for row in rows:
        lines.append(f"| {_row_name(row)} | " + ' | '.join(_cell(row, m) for m in columns) + ' |')
    return lines


def _paired_table(title, rows, notes):
    """Activation and valence side by side, one line per model variant"""
    mode = rows[0].key['mode']
    columns = _columns(rows, mode, notes)
    by_variant = {}
    for row in rows:
        variant = (row.key['modality'], row.key['lambda'], row.key['placement'], tuple(row.key['adversaries']))
        by_variant.setdefault(variant, {})[row.key['task']] = row
    tasks = [t for t in TASKS if any(t in v for v in by_variant.values())]
    header = '| Setup | ' + ' | '.join(f"{t.capitalize()} {m}" for t in tasks for m in columns) + ' |'
    lines = [f"### {title}", '', header, '|---|' + '---|' * (len(columns) * len(tasks))]
    for variant in sorted(by_variant):
        cells = by_variant[variant]
        name = _row_name(next(iter(cells.values())))
        values = [(_cell(cells[t], m) if t in cells else '-') for t in tasks for m in columns]
        lines.append(f"| {name} | " + ' | '.join(values) + ' |')
    return lines


def emit_table(report):
    """Markdown tables: one per (mode, task), or per mode with paired task groups for multi-adversary runs"""
    notes = []
    lines = [f"# {report.scenario}", '', f"Config hash: `{report.config_hash}`", '']
    multi = report.scenario == 'q7-multi'
    for mode in ('Gen', 'Priv'):
        mode_rows = [r for r in report.rows if r.key['mode'] == mode]
        if not mode_rows:
            continue
        if multi:
            lines += _paired_table(f"{mode}", mode_rows, notes) + ['']
            continue
        for task in TASKS:
            task_rows = [r for r in mode_rows if r.key['task'] == task]
            if task_rows:
                lines += _simple_table(f"{mode} - {task}", task_rows, notes) + ['']
    lines.append('Bold: BH-adjusted p < alpha against the compared row. Italic: significant decrease.')
    for note in dict.fromkeys(notes):
        lines.append(f"- {note}")
    return '\n'.join(lines) + '\n'
