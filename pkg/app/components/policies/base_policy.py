'''Implements BasePolicy which is an abstract class to be inherited by all exploration policies,
and the episode loop that runs a policy against a freshly generated task.'''

# LOAD DEPENDENCY ----------------------------------------------------------
import logging
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.components.environment import EpisodeState, TaskConfig, generate_task, step
from app.components.hypothesis import (
    HypothesisSet,
    enumerate_hypotheses,
    expected_info_gain,
    filter_consistent,
    is_sufficient,
    steps_to_sufficiency,
)
from app.components.trajectory import (
    EPISODE_ERROR,
    EXHAUSTED_UNIVERSE,
    Trajectory,
    TrajectoryStep,
)
from app.components.utils.errors import (
    ConfigurationError,
    ExhaustedUniverseError,
    ExplorationError,
    InconsistentHistoryError,
)

logger = logging.getLogger(__name__)

# second entropy word keeps the policy stream apart from the task stream
_POLICY_STREAM = 1


# CLASS OBJECT -------------------------------------------------------------
@dataclass(frozen=True)
class PolicyDecision:
    object_id: Optional[int]
    rationale: Optional[str] = None
    stop: bool = False


# ABSTRACT CLASS -----------------------------------------------------------
class BasePolicy(ABC):
    '''Implements BasePolicy which is an abstract class to be inherited by all policies.

    A policy is stateless between calls apart from the generator handed to it,
    so the same (state, hypotheses, generator position) gives the same decision.
    '''
    def __init__(self):
        self.policy_name = 'base'
        self.allow_repeats = False
        self.stop_at_sufficiency = True
        self.verbose = False

    @abstractmethod
    def decide(self, state: EpisodeState, hypotheses: HypothesisSet, rng: np.random.Generator) -> PolicyDecision:
        pass

    def run_episode(self, config: TaskConfig, seed: int, condition: str = '', episode: int = 0):
        return run_policy_episode(self, config, seed, condition=condition, episode=episode)

    def __repr__(self):
        return f'{type(self).__name__}({self.policy_name!r})'


# FUNCTIONS ----------------------------------------------------------------
def policy_rng(seed: int) -> np.random.Generator:
    '''Decision stream for an episode; independent of the task-generation stream.'''
    return np.random.default_rng([int(seed), _POLICY_STREAM])


def perfect_reasoning_answer(hypotheses: HypothesisSet, rng: np.random.Generator) -> str:
    '''Answer of an ideal reasoner: the surviving rule, or a uniform guess among alive rules.'''
    alive = hypotheses.alive_rules()
    if is_sufficient(hypotheses):
        return alive[0].answer_text()
    return alive[int(rng.integers(len(alive)))].answer_text()


def record_sufficiency(trajectory: Trajectory):
    try:
        trajectory.steps_to_sufficiency, trajectory.censored = steps_to_sufficiency(trajectory, trajectory.config)
    except InconsistentHistoryError as error:
        trajectory.steps_to_sufficiency, trajectory.censored = None, None
        trajectory.failure = trajectory.failure or EPISODE_ERROR
        trajectory.error = str(error)


def run_policy_episode(policy: BasePolicy, config: TaskConfig, seed: int,
                       condition: str = '', episode: int = 0) -> Trajectory:
    '''Generate a task from (config, seed) and let the policy play it.

    The loop ends when the policy stops (never before the first pick), when the
    hypothesis set is sufficient for a policy that stops there, when the budget
    is spent, or when the universe is exhausted. Policy and environment errors
    end the episode and are kept on the trajectory as a failure record.
    '''
    started = time.time()
    state = generate_task(config.with_seed(seed))
    hypotheses = enumerate_hypotheses(state.config)
    rng = policy_rng(seed)
    trajectory = Trajectory(
        condition=condition or policy.policy_name,
        episode=episode,
        seed=int(seed),
        policy=policy.policy_name,
        config=state.config,
        hidden_rule=state.hidden_rule,
    )
    try:
        while not state.terminated:
            if state.history and policy.stop_at_sufficiency and is_sufficient(hypotheses):
                break
            decision = policy.decide(state, hypotheses, rng)
            if decision.stop and state.history:
                break
            if decision.object_id is None:
                break
            obj = state.get_object(decision.object_id)
            gain = expected_info_gain(hypotheses, obj)
            reward, state = step(state, obj.id, allow_repeat=policy.allow_repeats)
            hypotheses = filter_consistent(hypotheses, state.history[-1], obj)
            trajectory.steps.append(TrajectoryStep(
                step_index=len(state.history),
                object_id=obj.id,
                description=obj.description(),
                reward=reward,
                alive=hypotheses.size,
                eig=gain,
            ))
            if policy.verbose:
                logger.debug(f'{policy.policy_name} seed={seed} step {len(state.history)}: '
                             f'{obj.description()} -> {reward} | alive={hypotheses.size} | eig={gain:.3f}')
    except ExhaustedUniverseError as error:
        trajectory.failure = EXHAUSTED_UNIVERSE
        trajectory.error = str(error)
    except ConfigurationError:
        raise
    except ExplorationError as error:
        trajectory.failure = EPISODE_ERROR
        trajectory.error = f'{type(error).__name__}: {error}'
        logger.warning(f'{policy.policy_name} seed={seed} failed: {trajectory.error}')

    trajectory.final_answer = perfect_reasoning_answer(hypotheses, rng)
    record_sufficiency(trajectory)
    trajectory.wall_clock = {'started': started, 'elapsed_seconds': time.time() - started}
    return trajectory


def create_policy(name: str, backend=None, retry_policy=None) -> BasePolicy:
    '''Resolve a harness policy name: "optimal", "random_with", "random_without" or "llm:<variant>".'''
    from app.components.policies import optimal_policy, random_policy

    if name == 'optimal':
        return optimal_policy.OptimalPolicy()
    if name == 'random_with':
        return random_policy.RandomWithReplacementPolicy()
    if name == 'random_without':
        return random_policy.RandomWithoutReplacementPolicy()
    if name.startswith('llm:'):
        from app.components.agents import llm_agent, prompts

        if backend is None:
            raise ConfigurationError(f'policy {name!r} needs a model backend')
        variant = prompts.PromptVariant.from_name(name.split(':', 1)[1])
        return llm_agent.LLMAgent(backend=backend, variant=variant, retry_policy=retry_policy)
    raise ConfigurationError(f'policy {name!r} is not defined')
