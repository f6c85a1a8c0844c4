'''Scores trajectories and aggregates the scores into summary tables.'''

# LOAD DEPENDENCY ----------------------------------------------------------
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from app.components.agents.parsing import tokenize
from app.components.environment import RewardRule, value_spellings
from app.components.trajectory import BACKEND_FAILURE, EPISODE_ERROR, INVALID_ACTION_ABORT, Trajectory

logger = logging.getLogger(__name__)

# episodes ending with these failures carry no usable efficiency measure
ABORTED_FAILURES = frozenset({INVALID_ACTION_ABORT, BACKEND_FAILURE, EPISODE_ERROR})
SUMMARY_COLUMNS = ['mean', 'sem', 'n', 'censored', 'accuracy', 'aborted']


# CLASS OBJECT -------------------------------------------------------------
@dataclass
class ScoreRecord:
    condition: str
    episode: int
    seed: int
    policy: str
    rule_kind: str
    n_colors: int
    steps_to_sufficiency: Optional[int]
    censored: Optional[bool]
    accuracy: int
    exploitation: List[int] = field(default_factory=list)
    failure: Optional[str] = None
    flags: List[str] = field(default_factory=list)

    @property
    def aborted(self) -> bool:
        return self.failure in ABORTED_FAILURES or self.steps_to_sufficiency is None

    def to_row(self) -> Dict:
        row = asdict(self)
        row['aborted'] = self.aborted
        return row


# FUNCTIONS ----------------------------------------------------------------
def score_answer(answer: Optional[str], rule: RewardRule) -> int:
    '''1 if every target word of `rule` appears as a token of `answer`, else 0.

    Matching is case-insensitive on alphanumeric tokens. A texture may also be
    named by its adjective ("wooden" for wood).

    Example:
        >>> score_answer('* **WINNING COMBINATION:** COLOR, SHAPE (Blue, Cylinder)', rule)
        1
    '''
    if not answer:
        return 0
    tokens = set(tokenize(answer))
    for factor, label in rule.conditions:
        if not tokens.intersection(value_spellings(factor, label)):
            return 0
    return 1


def exploitation_curve(trajectory: Trajectory, rule: RewardRule = None) -> List[int]:
    '''Score of the claim stated after each step, for steps that carry one.'''
    rule = rule or trajectory.hidden_rule
    return [score_answer(s.winning_combination, rule) for s in trajectory.steps if s.winning_combination is not None]


def score_trajectory(trajectory: Trajectory) -> ScoreRecord:
    return ScoreRecord(
        condition=trajectory.condition,
        episode=trajectory.episode,
        seed=trajectory.seed,
        policy=trajectory.policy,
        rule_kind=trajectory.config.rule_kind.value,
        n_colors=trajectory.n_colors,
        steps_to_sufficiency=trajectory.steps_to_sufficiency,
        censored=trajectory.censored,
        accuracy=score_answer(trajectory.final_answer, trajectory.hidden_rule),
        exploitation=exploitation_curve(trajectory),
        failure=trajectory.failure,
        flags=list(trajectory.flags),
    )


def records_frame(records: Iterable[ScoreRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in records])


def aggregate(records: Iterable[ScoreRecord], group_by: Sequence[str] = ('condition',),
              value: str = 'steps_to_sufficiency') -> pd.DataFrame:
    '''Mean, standard error, count, censored count, accuracy and aborted count per group.

    Censored episodes enter the means at the budget cap. Aborted episodes are
    left out of the means and only counted. Groups with no usable episode are
    omitted with a warning. SEM uses the sample standard deviation and is NaN
    for a single episode.
    '''
    group_by = list(group_by)
    frame = records_frame(records)
    if frame.empty:
        logger.warning('no records to aggregate')
        return pd.DataFrame(columns=group_by + SUMMARY_COLUMNS)

    rows = []
    for keys, group in frame.groupby(group_by, sort=True):
        keys = keys if isinstance(keys, tuple) else (keys,)
        usable = group[~group['aborted'] & group[value].notna()]
        if usable.empty:
            logger.warning(f'group {dict(zip(group_by, keys))} has no usable episodes; omitted')
            continue
        values = usable[value].astype(float)
        n = len(values)
        sem = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else float('nan')
        row = dict(zip(group_by, keys))
        row.update({
            'mean': float(values.mean()),
            'sem': sem,
            'n': n,
            'censored': int(usable['censored'].fillna(False).astype(bool).sum()),
            'accuracy': float(usable['accuracy'].mean()),
            'aborted': int(group['aborted'].sum()),
        })
        rows.append(row)
    return pd.DataFrame(rows, columns=group_by + SUMMARY_COLUMNS)


def exploitation_table(records: Iterable[ScoreRecord], group_by: Sequence[str] = ('condition',)) -> pd.DataFrame:
    '''Mean exploitation score per group and step index (1-based).'''
    rows = []
    for record in records:
        for step_index, score in enumerate(record.exploitation, start=1):
            row = {key: getattr(record, key) for key in group_by}
            row.update({'step': step_index, 'score': score})
            rows.append(row)
    if not rows:
        return pd.DataFrame(columns=list(group_by) + ['step', 'mean', 'n'])
    frame = pd.DataFrame(rows)
    table = frame.groupby(list(group_by) + ['step'])['score'].agg(['mean', 'count']).reset_index()
    return table.rename(columns={'count': 'n'})
