'''Loads task configs and sweep specs from YAML files or plain mappings.

Task keys:  rule_kind, colors, shapes, textures, budget, seed, sample, preset
Sweep keys: out_dir, jobs, max_in_flight, backend, retry, conditions

A vocabulary may be a list of labels, a comma-separated string, or an integer n
(the first n labels of the default vocabulary). `sample` maps vocabulary keys to
the number of labels drawn per episode from that pool.
'''

# LOAD DEPENDENCY ----------------------------------------------------------
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional

import yaml

from app.components.agents.llm_agent import RetryPolicy
from app.components.environment import DEFAULT_VOCAB, Factor, RuleKind, TaskConfig
from app.components.utils.errors import ConfigurationError

FACTOR_KEYS = {'colors': Factor.COLOR, 'shapes': Factor.SHAPE, 'textures': Factor.TEXTURE}
TASK_KEYS = {'rule_kind', 'budget', 'seed', 'sample', 'preset'} | set(FACTOR_KEYS)
SWEEP_KEYS = {'out_dir', 'jobs', 'max_in_flight', 'backend', 'retry', 'conditions'}
CONDITION_KEYS = {'name', 'policy', 'episodes', 'base_seed', 'task', 'color_counts'}
BASELINE_POLICIES = ('optimal', 'random_with', 'random_without')
_NAME_PATTERN = re.compile(r'^[A-Za-z0-9._-]+$')

PRESETS = {
    # 3 of 6 colors and 3 of 5 shapes drawn per episode, 4 pickups;
    # random_with then averages 796/243 steps, 0.72 below the cap
    'construction-lab': {
        'rule_kind': 'single_feature', 'colors': 6, 'shapes': 5,
        'sample': {'colors': 3, 'shapes': 3}, 'budget': 4,
    },
    'text-single-feature': {'rule_kind': 'single_feature', 'colors': 6, 'shapes': 5},
    'text-conjunction': {'rule_kind': 'conjunction', 'colors': 6, 'shapes': 5, 'textures': 3},
}


# CLASS OBJECT -------------------------------------------------------------
@dataclass(frozen=True)
class Condition:
    name: str
    policy: str
    episodes: int
    base_seed: int
    task: TaskConfig

    def seed_of(self, episode: int) -> int:
        return self.base_seed + episode

    def to_dict(self) -> Dict:
        return {'name': self.name, 'policy': self.policy, 'episodes': self.episodes,
                'base_seed': self.base_seed, 'task': self.task.to_dict()}


@dataclass
class SweepSpec:
    conditions: List[Condition]
    out_dir: str = 'runs/latest'
    jobs: int = 1
    max_in_flight: int = 4
    backend: Optional[Dict] = None
    retry: RetryPolicy = field(default_factory=RetryPolicy)

    def validate(self):
        if not self.conditions:
            raise ConfigurationError('sweep has no conditions')
        names = [c.name for c in self.conditions]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ConfigurationError(f'condition names must be unique, repeated: {duplicates}')
        if self.jobs < 1 or self.max_in_flight < 1:
            raise ConfigurationError('jobs and max_in_flight must be >= 1')
        for condition in self.conditions:
            if condition.policy.startswith('llm:') and self.backend is None:
                raise ConfigurationError(f'condition {condition.name!r} needs a `backend` block')


# FUNCTIONS ----------------------------------------------------------------
def load_yaml(path) -> Dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f'config file {path} not found')
    try:
        with open(path, 'r', encoding='utf-8') as file:
            data = yaml.safe_load(file) or {}
    except yaml.YAMLError as error:
        raise ConfigurationError(f'{path}: {error}') from error
    if not isinstance(data, dict):
        raise ConfigurationError(f'{path}: expected a mapping at the top level')
    return data


def _int(value, key: str, minimum: int = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f'`{key}` must be an integer, got {value!r}')
    if minimum is not None and value < minimum:
        raise ConfigurationError(f'`{key}` must be >= {minimum}, got {value}')
    return value


def parse_vocab(factor: Factor, value) -> tuple:
    if isinstance(value, bool):
        raise ConfigurationError(f'invalid {factor.value} vocabulary: {value!r}')
    if isinstance(value, int):
        default = DEFAULT_VOCAB[factor]
        if not 1 <= value <= len(default):
            raise ConfigurationError(
                f'{value} {factor.value} labels requested, the default vocabulary has {len(default)}; list them')
        return tuple(default[:value])
    if isinstance(value, str):
        return tuple(label.strip() for label in value.split(',') if label.strip())
    if isinstance(value, (list, tuple)):
        return tuple(str(label).strip() for label in value)
    raise ConfigurationError(f'invalid {factor.value} vocabulary: {value!r}')


def resolve_preset(mapping: Mapping) -> Dict:
    mapping = dict(mapping)
    name = mapping.pop('preset', None)
    if name is None:
        return mapping
    if name not in PRESETS:
        raise ConfigurationError(f'preset {name!r} is not defined, use one of {sorted(PRESETS)}')
    merged = dict(PRESETS[name])
    merged.update(mapping)
    return merged


def task_config_from_mapping(mapping: Mapping) -> TaskConfig:
    unknown = set(mapping) - TASK_KEYS
    if unknown:
        raise ConfigurationError(f'unknown task key(s): {sorted(unknown)}')
    mapping = resolve_preset(mapping)
    try:
        rule_kind = RuleKind(mapping.get('rule_kind', RuleKind.SINGLE_FEATURE.value))
    except ValueError as error:
        raise ConfigurationError(f'unknown rule kind {mapping.get("rule_kind")!r}') from error

    vocab = {}
    for key, factor in FACTOR_KEYS.items():
        if factor in rule_kind.factors:
            vocab[factor] = parse_vocab(factor, mapping.get(key, len(DEFAULT_VOCAB[factor])))
        elif key in mapping:
            raise ConfigurationError(f'`{key}` is not used by {rule_kind.value} tasks')

    sample_sizes = None
    if mapping.get('sample') is not None:
        sample = mapping['sample']
        if not isinstance(sample, Mapping) or set(sample) - set(FACTOR_KEYS):
            raise ConfigurationError(f'`sample` must map vocabulary keys to counts, got {sample!r}')
        sample_sizes = {FACTOR_KEYS[key]: _int(n, f'sample.{key}', 1) for key, n in sample.items()}

    budget = mapping.get('budget')
    config = TaskConfig(
        rule_kind=rule_kind,
        vocab=vocab,
        budget=None if budget is None else _int(budget, 'budget', 1),
        seed=_int(mapping.get('seed', 0), 'seed', 0),
        sample_sizes=sample_sizes,
    )
    config.validate()
    return config


def load_task_config(path) -> TaskConfig:
    return task_config_from_mapping(load_yaml(path))


def expand_condition(mapping: Mapping) -> List[Condition]:
    '''One condition, or one per entry of `color_counts`.'''
    unknown = set(mapping) - CONDITION_KEYS
    if unknown:
        raise ConfigurationError(f'unknown condition key(s): {sorted(unknown)}')
    policy = mapping.get('policy')
    if not isinstance(policy, str) or not (policy in BASELINE_POLICIES or policy.startswith('llm:')):
        raise ConfigurationError(f'condition policy {policy!r} is not defined')
    episodes = _int(mapping.get('episodes', 1), 'episodes', 1)
    base_seed = _int(mapping.get('base_seed', 0), 'base_seed', 0)
    task = dict(mapping.get('task') or {})
    base_config = task_config_from_mapping(task)
    name = mapping.get('name') or f'{policy.replace(":", "-")}-{base_config.rule_kind.value}'

    counts = mapping.get('color_counts')
    if counts is None:
        variants = [(name, base_config)]
    else:
        if not isinstance(counts, (list, tuple)) or not counts:
            raise ConfigurationError('`color_counts` must be a non-empty list')
        colors = resolve_preset(task).get('colors', len(DEFAULT_VOCAB[Factor.COLOR]))
        pool = parse_vocab(Factor.COLOR, colors) if not isinstance(colors, int) else DEFAULT_VOCAB[Factor.COLOR]
        variants = []
        for n in counts:
            n = _int(n, 'color_counts', 1)
            if n > len(pool):
                raise ConfigurationError(f'{n} colors requested from a pool of {len(pool)}')
            variants.append((f'{name}-c{n}', task_config_from_mapping({**task, 'colors': list(pool[:n])})))

    conditions = []
    for condition_name, config in variants:
        if not _NAME_PATTERN.match(condition_name):
            raise ConfigurationError(f'condition name {condition_name!r} must use letters, digits, ".", "_" or "-"')
        conditions.append(Condition(condition_name, policy, episodes, base_seed, config))
    return conditions


def sweep_spec_from_mapping(mapping: Mapping) -> SweepSpec:
    unknown = set(mapping) - SWEEP_KEYS
    if unknown:
        raise ConfigurationError(f'unknown sweep key(s): {sorted(unknown)}')
    raw_conditions = mapping.get('conditions')
    if not isinstance(raw_conditions, list):
        raise ConfigurationError('`conditions` must be a list')
    conditions = [c for entry in raw_conditions for c in expand_condition(entry)]
    retry = mapping.get('retry') or {}
    try:
        retry_policy = RetryPolicy(**retry)
    except TypeError as error:
        raise ConfigurationError(f'invalid retry block: {error}') from error
    spec = SweepSpec(
        conditions=conditions,
        out_dir=str(mapping.get('out_dir', 'runs/latest')),
        jobs=_int(mapping.get('jobs', 1), 'jobs', 1),
        max_in_flight=_int(mapping.get('max_in_flight', 4), 'max_in_flight', 1),
        backend=dict(mapping['backend']) if mapping.get('backend') else None,
        retry=retry_policy,
    )
    spec.validate()
    return spec


def load_sweep_spec(path) -> SweepSpec:
    return sweep_spec_from_mapping(load_yaml(path))
