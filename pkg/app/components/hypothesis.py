'''Exact inference over the reward-rule space of a task.

Every rule a task could hide is enumerated up front and evaluated against every
object once, giving a rules x objects label matrix. A HypothesisSet is that
matrix plus a mask of the rules still consistent with the observations; all
queries (entropy, expected information gain, sufficiency) are computed from it
under a uniform prior. Sets are immutable: filtering returns a new set.
'''

# LOAD DEPENDENCY ----------------------------------------------------------
import itertools
from dataclasses import dataclass
from typing import FrozenSet, List, Mapping, Sequence, Tuple

import numpy as np

from app.components.environment import (
    Factor,
    Observation,
    RewardRule,
    RuleKind,
    SceneObject,
    TaskConfig,
    build_universe,
)
from app.components.utils.errors import ConfigurationError, InconsistentHistoryError


# CLASS OBJECT -------------------------------------------------------------
@dataclass(frozen=True)
class LabelingClass:
    '''Rules that label every object of the universe identically.'''
    rules: FrozenSet[RewardRule]
    labels: Tuple[int, ...]


class HypothesisSet:
    '''Alive reward rules for one task universe.'''

    def __init__(self, rule_kind, vocab, universe, rules, label_matrix, alive):
        self.rule_kind = rule_kind
        self.vocab = vocab
        self.universe = universe
        self.rules = rules
        self.label_matrix = label_matrix
        self.alive_mask = alive
        self.label_matrix.setflags(write=False)
        self.alive_mask.setflags(write=False)

    @classmethod
    def from_universe(cls, rule_kind: RuleKind, vocab: Mapping[Factor, Sequence[str]],
                      universe: Sequence[SceneObject]) -> 'HypothesisSet':
        universe = list(universe)
        for index, obj in enumerate(universe):
            if obj.id != index:
                raise ValueError(f'object ids must be dense and ordered, got id {obj.id} at position {index}')
        rules = enumerate_rules(rule_kind, vocab)
        columns = {
            factor: np.array([obj.values[factor] for obj in universe], dtype=object)
            for factor in rule_kind.factors
        }
        label_matrix = np.ones((len(rules), len(universe)), dtype=np.int8)
        for row, rule in enumerate(rules):
            for factor, value in rule.conditions:
                label_matrix[row] &= (columns[factor] == value).astype(np.int8)
        alive = np.ones(len(rules), dtype=bool)
        return cls(rule_kind, dict(vocab), universe, rules, label_matrix, alive)

    def _with_alive(self, alive: np.ndarray) -> 'HypothesisSet':
        return HypothesisSet(self.rule_kind, self.vocab, self.universe, self.rules, self.label_matrix, alive)

    @property
    def size(self) -> int:
        return int(self.alive_mask.sum())

    @property
    def alive(self) -> FrozenSet[RewardRule]:
        return frozenset(self.alive_rules())

    def alive_rules(self) -> List[RewardRule]:
        '''Alive rules in enumeration order.'''
        return [rule for rule, keep in zip(self.rules, self.alive_mask) if keep]

    def alive_labels(self) -> np.ndarray:
        return self.label_matrix[self.alive_mask]

    def __len__(self):
        return self.size

    def __contains__(self, rule):
        try:
            return bool(self.alive_mask[self.rules.index(rule)])
        except ValueError:
            return False

    def __repr__(self):
        return f'HypothesisSet({self.rule_kind.value}, alive={self.size}/{len(self.rules)})'


# FUNCTIONS ----------------------------------------------------------------
def enumerate_rules(rule_kind: RuleKind, vocab: Mapping[Factor, Sequence[str]]) -> Tuple[RewardRule, ...]:
    rules = []
    for group in rule_kind.factor_groups:
        for values in itertools.product(*(vocab[f] for f in group)):
            rules.append(RewardRule(rule_kind, tuple(zip(group, values))))
    return tuple(rules)


def enumerate_hypotheses(config: TaskConfig) -> HypothesisSet:
    '''Full rule space of a (realized) task config.

    SingleFeature gives |C| + |S| rules, Conjunction |C||S| + |C||T| + |S||T|.
    '''
    config.validate()
    if config.sample_sizes is not None:
        raise ConfigurationError('vocabulary is still a sampling pool; enumerate over the episode config instead')
    return HypothesisSet.from_universe(config.rule_kind, config.vocab, build_universe(config))


def filter_consistent(hypotheses: HypothesisSet, obs: Observation, obj: SceneObject) -> HypothesisSet:
    if obs.object_id != obj.id:
        raise ValueError(f'observation refers to object {obs.object_id}, not {obj.id}')
    column = hypotheses.label_matrix[:, obj.id]
    alive = hypotheses.alive_mask & (column == obs.reward)
    if not alive.any():
        raise InconsistentHistoryError(
            f'no rule gives reward {obs.reward} for {obj.description()} at step {obs.step_index}')
    return hypotheses._with_alive(alive)


def posterior_entropy(hypotheses: HypothesisSet) -> float:
    '''Entropy in bits of the uniform posterior over alive rules.'''
    size = hypotheses.size
    if size == 0:
        raise ValueError('entropy of an empty hypothesis set')
    return float(np.log2(size))


def labeling_classes(hypotheses: HypothesisSet) -> List[LabelingClass]:
    cells = {}
    for rule, labels in zip(hypotheses.alive_rules(), hypotheses.alive_labels()):
        key = tuple(int(v) for v in labels)
        cells.setdefault(key, []).append(rule)
    return [LabelingClass(rules=frozenset(rules), labels=key) for key, rules in cells.items()]


def class_entropy(hypotheses: HypothesisSet) -> float:
    '''Entropy in bits over labeling classes, each weighted by its share of alive rules.'''
    size = hypotheses.size
    if size == 0:
        raise ValueError('entropy of an empty hypothesis set')
    weights = np.array([len(cell.rules) for cell in labeling_classes(hypotheses)], dtype=float) / size
    return float(-(weights * np.log2(weights)).sum())


def _split_gain(size: int, positives: np.ndarray) -> np.ndarray:
    positives = np.asarray(positives, dtype=float)
    negatives = size - positives
    with np.errstate(divide='ignore', invalid='ignore'):
        remaining = (
            np.where(positives > 0, positives / size * np.log2(positives), 0.0)
            + np.where(negatives > 0, negatives / size * np.log2(negatives), 0.0)
        )
    gain = np.log2(size) - remaining
    # no split, no information
    return np.where((positives == 0) | (negatives == 0), 0.0, gain)


def expected_info_gain_all(hypotheses: HypothesisSet) -> np.ndarray:
    '''Expected information gain in bits of observing each object, indexed by object id.'''
    size = hypotheses.size
    if size == 0:
        raise ValueError('information gain over an empty hypothesis set')
    positives = hypotheses.alive_labels().sum(axis=0)
    return _split_gain(size, positives)


def expected_info_gain(hypotheses: HypothesisSet, obj: SceneObject) -> float:
    size = hypotheses.size
    if size == 0:
        raise ValueError('information gain over an empty hypothesis set')
    positives = hypotheses.label_matrix[hypotheses.alive_mask, obj.id].sum()
    return float(_split_gain(size, np.array([positives]))[0])


def is_sufficient(hypotheses: HypothesisSet) -> bool:
    '''True when every alive rule predicts the same reward for every object.'''
    labels = hypotheses.alive_labels()
    if len(labels) == 0:
        raise ValueError('sufficiency of an empty hypothesis set')
    return bool((labels == labels[0]).all())


def sufficiency_step(observations: Sequence[Observation], hypotheses: HypothesisSet):
    '''First 1-based step after which the set is sufficient, or None.'''
    for obs in observations:
        hypotheses = filter_consistent(hypotheses, obs, hypotheses.universe[obs.object_id])
        if is_sufficient(hypotheses):
            return obs.step_index
    return None


def steps_to_sufficiency(trajectory, config: TaskConfig):
    '''Steps needed before the observations identify the reward labeling.

    Args:
        trajectory: anything exposing `steps` (with `object_id` and `reward`)
            and `budget`, such as a Trajectory.
        config: the realized task config the trajectory was played on.

    Returns:
        (steps, censored); censored trajectories report the budget.
    '''
    observations = [
        Observation(object_id=s.object_id, reward=s.reward, step_index=i)
        for i, s in enumerate(trajectory.steps, start=1)
    ]
    found = sufficiency_step(observations, enumerate_hypotheses(config))
    if found is None:
        return int(trajectory.budget), True
    return found, False
