'''Feature-based exploration tasks with a hidden reward rule.

A task is the full cross of a few feature vocabularies (colors, shapes and,
for conjunction tasks, textures). One rule, hidden from the player, decides
which objects give a reward of 1. The episode state machine enforces the game
rules: an object cannot be picked twice and at most `budget` objects are
picked.

Example:
    config = TaskConfig(rule_kind=RuleKind.SINGLE_FEATURE, vocab={...}, seed=7)
    state = generate_task(config)
    reward, state = step(state, object_id=0)
'''

# LOAD DEPENDENCY ----------------------------------------------------------
import itertools
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from app.components.utils.errors import (
    ConfigurationError,
    EpisodeTerminatedError,
    ObjectNotFoundError,
    RepeatActionError,
)


# DOMAIN TYPES -------------------------------------------------------------
class Factor(str, Enum):
    COLOR = 'color'
    SHAPE = 'shape'
    TEXTURE = 'texture'


class RuleKind(str, Enum):
    SINGLE_FEATURE = 'single_feature'
    CONJUNCTION = 'conjunction'

    @property
    def factors(self) -> Tuple[Factor, ...]:
        if self is RuleKind.SINGLE_FEATURE:
            return (Factor.COLOR, Factor.SHAPE)
        return (Factor.COLOR, Factor.SHAPE, Factor.TEXTURE)

    @property
    def factor_groups(self) -> Tuple[Tuple[Factor, ...], ...]:
        '''Factor subsets a rule of this kind can test.'''
        if self is RuleKind.SINGLE_FEATURE:
            return ((Factor.COLOR,), (Factor.SHAPE,))
        return (
            (Factor.COLOR, Factor.SHAPE),
            (Factor.COLOR, Factor.TEXTURE),
            (Factor.SHAPE, Factor.TEXTURE),
        )


DEFAULT_VOCAB = {
    Factor.COLOR: ('red', 'green', 'blue', 'yellow', 'purple', 'orange'),
    Factor.SHAPE: ('cylinder', 'cube', 'plank', 'pyramid', 'disk'),
    Factor.TEXTURE: ('wood', 'plastic', 'steel'),
}

# labels rendered as adjectives in object descriptions; parsing accepts both
TEXTURE_ADJECTIVES = {'wood': 'wooden'}

# description word order: "a red wooden cube"
DESCRIPTION_ORDER = (Factor.COLOR, Factor.TEXTURE, Factor.SHAPE)

_LABEL_PATTERN = re.compile(r'^[A-Za-z0-9]+$')
_MAX_SEED = 2 ** 64


def render_value(factor: Factor, label: str) -> str:
    if factor is Factor.TEXTURE:
        return TEXTURE_ADJECTIVES.get(label.lower(), label)
    return label


def value_spellings(factor: Factor, label: str) -> Tuple[str, ...]:
    '''Lower-cased spellings that name a value in free text.'''
    spellings = {label.lower(), render_value(factor, label).lower()}
    return tuple(sorted(spellings))


@dataclass(frozen=True)
class TaskConfig:
    '''One experimental condition.

    Args:
        rule_kind: single-feature or conjunction reward rule.
        vocab: value labels per active factor.
        budget: maximum number of pickups. None resolves to the universe size.
        seed: generator seed for label sampling and rule sampling.
        sample_sizes: optional number of labels drawn per factor from `vocab`
            at generation time (the vocabulary then acts as a pool).
    '''
    rule_kind: RuleKind = RuleKind.SINGLE_FEATURE
    vocab: Mapping[Factor, Tuple[str, ...]] = field(
        default_factory=lambda: {f: DEFAULT_VOCAB[f] for f in RuleKind.SINGLE_FEATURE.factors})
    budget: Optional[int] = None
    seed: int = 0
    sample_sizes: Optional[Mapping[Factor, int]] = None

    @property
    def active_factors(self) -> Tuple[Factor, ...]:
        return self.rule_kind.factors

    @property
    def universe_size(self) -> int:
        return int(np.prod([len(self.vocab[f]) for f in self.active_factors]))

    def validate(self):
        if not isinstance(self.rule_kind, RuleKind):
            raise ConfigurationError(f'unknown rule kind: {self.rule_kind!r}')
        if set(self.vocab) != set(self.active_factors):
            raise ConfigurationError(
                f'{self.rule_kind.value} tasks need vocabularies for exactly '
                f'{[f.value for f in self.active_factors]}, got {[getattr(f, "value", f) for f in self.vocab]}')
        for factor in self.active_factors:
            labels = self.vocab[factor]
            if len(labels) == 0:
                raise ConfigurationError(f'{factor.value} vocabulary is empty')
            for label in labels:
                if not isinstance(label, str) or not _LABEL_PATTERN.match(label):
                    raise ConfigurationError(
                        f'{factor.value} label {label!r} must be a single alphanumeric word')
            lowered = [label.lower() for label in labels]
            if len(set(lowered)) != len(lowered):
                raise ConfigurationError(f'{factor.value} vocabulary has duplicate labels: {list(labels)}')
        if self.budget is not None:
            if isinstance(self.budget, bool) or not isinstance(self.budget, (int, np.integer)) or self.budget < 1:
                raise ConfigurationError(f'budget must be a positive integer, got {self.budget!r}')
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) \
                or not 0 <= self.seed < _MAX_SEED:
            raise ConfigurationError(f'seed must be an unsigned 64-bit integer, got {self.seed!r}')
        if self.sample_sizes is not None:
            for factor, size in self.sample_sizes.items():
                if factor not in self.vocab:
                    raise ConfigurationError(f'sample size given for inactive factor {factor!r}')
                if not 1 <= size <= len(self.vocab[factor]):
                    raise ConfigurationError(
                        f'cannot sample {size} {factor.value} labels from a pool of {len(self.vocab[factor])}')

    def with_seed(self, seed: int) -> 'TaskConfig':
        return replace(self, seed=int(seed))

    def to_dict(self) -> Dict:
        record = {
            'rule_kind': self.rule_kind.value,
            'vocab': {f.value: list(self.vocab[f]) for f in self.active_factors if f in self.vocab},
            'budget': self.budget,
            'seed': int(self.seed),
        }
        if self.sample_sizes is not None:
            record['sample_sizes'] = {f.value: int(n) for f, n in self.sample_sizes.items()}
        return record

    @classmethod
    def from_dict(cls, record: Mapping) -> 'TaskConfig':
        try:
            rule_kind = RuleKind(record['rule_kind'])
            vocab = {Factor(k): tuple(v) for k, v in record['vocab'].items()}
            sample_sizes = record.get('sample_sizes')
            if sample_sizes is not None:
                sample_sizes = {Factor(k): int(v) for k, v in sample_sizes.items()}
        except (KeyError, ValueError, TypeError, AttributeError) as error:
            raise ConfigurationError(f'invalid task config record: {error}') from error
        return cls(
            rule_kind=rule_kind,
            vocab=vocab,
            budget=record.get('budget'),
            seed=int(record.get('seed', 0)),
            sample_sizes=sample_sizes,
        )


@dataclass(frozen=True)
class SceneObject:
    id: int
    values: Mapping[Factor, str]

    def description(self) -> str:
        words = [render_value(f, self.values[f]) for f in DESCRIPTION_ORDER if f in self.values]
        return ' '.join(words)

    def phrase(self) -> str:
        description = self.description()
        article = 'an' if description[:1].lower() in 'aeiou' else 'a'
        return f'{article} {description}'


@dataclass(frozen=True)
class RewardRule:
    '''Hidden ground truth: one factor-value, or a conjunction of two.

    `conditions` holds (factor, label) pairs in canonical factor order, so two
    rules naming the same values compare equal.
    '''
    kind: RuleKind
    conditions: Tuple[Tuple[Factor, str], ...]

    def __post_init__(self):
        expected = 1 if self.kind is RuleKind.SINGLE_FEATURE else 2
        if len(self.conditions) != expected:
            raise ValueError(f'{self.kind.value} rule needs {expected} condition(s), got {self.conditions}')
        factors = [f for f, _ in self.conditions]
        if len(set(factors)) != len(factors):
            raise ValueError(f'conjunction factors must differ, got {factors}')
        order = list(Factor)
        object.__setattr__(
            self, 'conditions', tuple(sorted(self.conditions, key=lambda c: order.index(c[0]))))

    @classmethod
    def single(cls, factor: Factor, value: str) -> 'RewardRule':
        return cls(RuleKind.SINGLE_FEATURE, ((factor, value),))

    @classmethod
    def conjunction(cls, factor_a: Factor, value_a: str, factor_b: Factor, value_b: str) -> 'RewardRule':
        return cls(RuleKind.CONJUNCTION, ((factor_a, value_a), (factor_b, value_b)))

    @property
    def factors(self) -> Tuple[Factor, ...]:
        return tuple(f for f, _ in self.conditions)

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(v for _, v in self.conditions)

    def answer_text(self) -> str:
        '''Winning-combination text in the response format, e.g. "COLOR, SHAPE (blue, cylinder)".'''
        factors = ', '.join(f.value.upper() for f in self.factors)
        return f'{factors} ({", ".join(self.labels)})'

    def to_dict(self) -> Dict:
        return {'kind': self.kind.value, 'conditions': [[f.value, v] for f, v in self.conditions]}

    @classmethod
    def from_dict(cls, record: Mapping) -> 'RewardRule':
        return cls(RuleKind(record['kind']), tuple((Factor(f), v) for f, v in record['conditions']))


@dataclass(frozen=True)
class Observation:
    object_id: int
    reward: int
    step_index: int


@dataclass
class EpisodeState:
    config: TaskConfig
    universe: List[SceneObject]
    hidden_rule: RewardRule
    history: List[Observation] = field(default_factory=list)
    terminated: bool = False

    @property
    def budget(self) -> int:
        return self.config.budget if self.config.budget is not None else len(self.universe)

    @property
    def tried_ids(self) -> set:
        return {obs.object_id for obs in self.history}

    def untried_ids(self) -> List[int]:
        tried = self.tried_ids
        return [obj.id for obj in self.universe if obj.id not in tried]

    def get_object(self, object_id: int) -> SceneObject:
        if isinstance(object_id, bool) or not isinstance(object_id, (int, np.integer)) \
                or not 0 <= object_id < len(self.universe):
            raise ObjectNotFoundError(f'no object with id {object_id!r} in a universe of {len(self.universe)}')
        return self.universe[int(object_id)]


# FUNCTIONS ----------------------------------------------------------------
def build_universe(config: TaskConfig) -> List[SceneObject]:
    '''Full Cartesian product of the active vocabularies, ids in product order.'''
    factors = config.active_factors
    combos = itertools.product(*(config.vocab[f] for f in factors))
    return [SceneObject(id=i, values=dict(zip(factors, combo))) for i, combo in enumerate(combos)]


def realize_config(config: TaskConfig, rng: np.random.Generator) -> TaskConfig:
    '''Draw the per-episode vocabulary when the config carries sample sizes.'''
    if config.sample_sizes is None:
        return config
    vocab = {}
    for factor in config.active_factors:
        pool = config.vocab[factor]
        size = config.sample_sizes.get(factor, len(pool))
        picked = np.sort(rng.choice(len(pool), size=size, replace=False))
        vocab[factor] = tuple(pool[i] for i in picked)
    return replace(config, vocab=vocab, sample_sizes=None)


def sample_rule(config: TaskConfig, rng: np.random.Generator) -> RewardRule:
    '''Uniform over factors (or factor pairs), then uniform over values.'''
    groups = config.rule_kind.factor_groups
    group = groups[int(rng.integers(len(groups)))]
    conditions = []
    for factor in group:
        labels = config.vocab[factor]
        conditions.append((factor, labels[int(rng.integers(len(labels)))]))
    return RewardRule(config.rule_kind, tuple(conditions))


def generate_task(config: TaskConfig) -> EpisodeState:
    config.validate()
    rng = np.random.default_rng(config.seed)
    realized = realize_config(config, rng)
    universe = build_universe(realized)
    hidden_rule = sample_rule(realized, rng)
    realized = replace(realized, budget=realized.budget or len(universe))
    return EpisodeState(config=realized, universe=universe, hidden_rule=hidden_rule)


def reward_of(rule: RewardRule, obj: SceneObject) -> int:
    for factor, value in rule.conditions:
        if factor not in obj.values:
            raise KeyError(f'object {obj.id} has no {factor.value} value')
        if obj.values[factor] != value:
            return 0
    return 1


def step(state: EpisodeState, object_id: int, allow_repeat: bool = False):
    '''Pick up one object.

    Args:
        state: episode to advance (mutated in place).
        object_id: id of the object to pick up.
        allow_repeat: only the random-with-replacement baseline sets this.

    Returns:
        (reward, state)
    '''
    if state.terminated:
        raise EpisodeTerminatedError('episode already terminated')
    obj = state.get_object(object_id)
    if not allow_repeat and obj.id in state.tried_ids:
        raise RepeatActionError(f'object {obj.id} ({obj.description()}) was already picked up')
    reward = reward_of(state.hidden_rule, obj)
    state.history.append(Observation(object_id=obj.id, reward=reward, step_index=len(state.history) + 1))
    if len(state.history) >= state.budget:
        state.terminated = True
    return reward, state


def scene_description(state: EpisodeState) -> str:
    return '\n'.join(f'Object {obj.id + 1}: {obj.phrase()}' for obj in state.universe)


def history_description(state: EpisodeState) -> str:
    lines = []
    for obs in state.history:
        obj = state.universe[obs.object_id]
        lines.append(f'Step {obs.step_index}: pick up {obj.description()}, reward: {obs.reward}')
    return '\n'.join(lines)
