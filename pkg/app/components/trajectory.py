'''Trajectory record: the unit of persistence and scoring.

One trajectory per episode, one JSON object per line. Each run file starts with
a header line carrying the schema name and version.
'''

# LOAD DEPENDENCY ----------------------------------------------------------
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from app.components.environment import Factor, Observation, RewardRule, TaskConfig
from app.components.utils.errors import ConfigurationError, SchemaError

SCHEMA_NAME = 'explore-trajectory'
SCHEMA_VERSION = 1

# failure values
INVALID_ACTION_ABORT = 'invalid-action-abort'
BACKEND_FAILURE = 'backend-failure'
EXHAUSTED_UNIVERSE = 'exhausted-universe'
EPISODE_ERROR = 'error'
# flags
PREMATURE_STOP = 'premature-stop'


# CLASS OBJECT -------------------------------------------------------------
@dataclass
class TrajectoryStep:
    '''One pickup.

    `alive` is the number of rules left after this observation and `eig` the
    expected information gain of the picked object before it was observed.
    `winning_combination` is the claim the agent stated after seeing this
    step's reward (agents only).
    '''
    step_index: int
    object_id: int
    description: str
    reward: int
    alive: int
    eig: float
    raw: Optional[str] = None
    parsed: Optional[Dict] = None
    winning_combination: Optional[str] = None

    def to_dict(self) -> Dict:
        record = {
            'step_index': self.step_index,
            'object_id': self.object_id,
            'description': self.description,
            'reward': self.reward,
            'alive': self.alive,
            'eig': self.eig,
        }
        if self.raw is not None:
            record['raw'] = self.raw
        if self.parsed is not None:
            record['parsed'] = self.parsed
        if self.winning_combination is not None:
            record['winning_combination'] = self.winning_combination
        return record

    @classmethod
    def from_dict(cls, record: Dict) -> 'TrajectoryStep':
        return cls(
            step_index=int(record['step_index']),
            object_id=int(record['object_id']),
            description=str(record['description']),
            reward=int(record['reward']),
            alive=int(record['alive']),
            eig=float(record['eig']),
            raw=record.get('raw'),
            parsed=record.get('parsed'),
            winning_combination=record.get('winning_combination'),
        )


@dataclass
class Trajectory:
    condition: str
    episode: int
    seed: int
    policy: str
    config: TaskConfig
    hidden_rule: RewardRule
    steps: List[TrajectoryStep] = field(default_factory=list)
    final_answer: Optional[str] = None
    steps_to_sufficiency: Optional[int] = None
    censored: Optional[bool] = None
    failure: Optional[str] = None
    error: Optional[str] = None
    flags: List[str] = field(default_factory=list)
    wall_clock: Dict = field(default_factory=dict)

    @property
    def budget(self) -> int:
        return int(self.config.budget)

    @property
    def n_colors(self) -> int:
        return len(self.config.vocab.get(Factor.COLOR, ()))

    def observations(self) -> List[Observation]:
        return [Observation(s.object_id, s.reward, s.step_index) for s in self.steps]

    def claims(self) -> List[str]:
        return [s.winning_combination for s in self.steps if s.winning_combination is not None]

    def to_dict(self, include_wall_clock: bool = True) -> Dict:
        record = {
            'condition': self.condition,
            'episode': self.episode,
            'seed': self.seed,
            'policy': self.policy,
            'config': self.config.to_dict(),
            'hidden_rule': self.hidden_rule.to_dict(),
            'steps': [s.to_dict() for s in self.steps],
            'final_answer': self.final_answer,
            'steps_to_sufficiency': self.steps_to_sufficiency,
            'censored': self.censored,
            'failure': self.failure,
            'error': self.error,
            'flags': list(self.flags),
        }
        if include_wall_clock:
            record['wall_clock'] = dict(self.wall_clock)
        return record

    @classmethod
    def from_dict(cls, record: Dict) -> 'Trajectory':
        try:
            return cls(
                condition=str(record['condition']),
                episode=int(record['episode']),
                seed=int(record['seed']),
                policy=str(record['policy']),
                config=TaskConfig.from_dict(record['config']),
                hidden_rule=RewardRule.from_dict(record['hidden_rule']),
                steps=[TrajectoryStep.from_dict(s) for s in record['steps']],
                final_answer=record.get('final_answer'),
                steps_to_sufficiency=record.get('steps_to_sufficiency'),
                censored=record.get('censored'),
                failure=record.get('failure'),
                error=record.get('error'),
                flags=list(record.get('flags', [])),
                wall_clock=dict(record.get('wall_clock', {})),
            )
        except (KeyError, TypeError, ValueError, ConfigurationError) as error:
            raise SchemaError(f'invalid trajectory record: {error!r}') from error


def header_record(condition: Dict) -> Dict:
    return {'schema': SCHEMA_NAME, 'version': SCHEMA_VERSION, 'condition': condition}


def check_header(record: Dict):
    if record.get('schema') != SCHEMA_NAME:
        raise SchemaError(f'not a trajectory file header: {record!r}')
    if record.get('version') != SCHEMA_VERSION:
        raise SchemaError(f'unsupported trajectory schema version {record.get("version")!r}')
