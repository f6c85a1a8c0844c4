'''Implements LLMAgent, the language-model policy, and its episode loop.

Each turn renders the prompt for the current state, asks the backend, optionally
runs the self-correction pass, parses the reply and executes exactly one pickup.
Replies that cannot be parsed are re-requested with a format reminder; after the
retry budget the episode is aborted and kept with a failure record.
'''

# LOAD DEPENDENCY ----------------------------------------------------------
import logging
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

from app.components.agents.backends import DecodingParams, ModelBackend
from app.components.agents.parsing import ParsedResponse, parse_response
from app.components.agents.prompts import (
    PromptVariant,
    render_prompt,
    render_self_correction,
    with_reminder,
)
from app.components.environment import EpisodeState, TaskConfig, generate_task, step
from app.components.hypothesis import (
    enumerate_hypotheses,
    expected_info_gain,
    filter_consistent,
    is_sufficient,
)
from app.components.policies.base_policy import BasePolicy, PolicyDecision, record_sufficiency
from app.components.trajectory import (
    BACKEND_FAILURE,
    EPISODE_ERROR,
    EXHAUSTED_UNIVERSE,
    INVALID_ACTION_ABORT,
    PREMATURE_STOP,
    Trajectory,
    TrajectoryStep,
)
from app.components.utils.errors import (
    BackendError,
    ConfigurationError,
    ExplorationError,
    ParseFailure,
    TemplateError,
)

logger = logging.getLogger(__name__)

BackendFactory = Callable[[TaskConfig, int], ModelBackend]


# CLASS OBJECT -------------------------------------------------------------
@dataclass(frozen=True)
class RetryPolicy:
    '''Re-prompts after an unusable reply and re-sends after a backend error.'''
    parse_retries: int = 2
    backend_retries: int = 2
    backoff_seconds: float = 1.0


# FUNCTIONS ----------------------------------------------------------------
def complete_with_retries(backend: ModelBackend, prompt: str, retry_policy: RetryPolicy,
                          params: Optional[DecodingParams] = None) -> str:
    for attempt in range(retry_policy.backend_retries + 1):
        try:
            return backend.complete(prompt, params)
        except BackendError as error:
            if attempt == retry_policy.backend_retries:
                raise
            wait = retry_policy.backoff_seconds * 2 ** attempt
            logger.warning(f'{backend.name}: {error}; retrying in {wait:.1f}s')
            time.sleep(wait)


def self_correct(task_prompt: str, proposed: str, backend: ModelBackend,
                 retry_policy: RetryPolicy = None, params: Optional[DecodingParams] = None) -> str:
    '''Ask the backend to review `proposed` for `task_prompt`; returns the (possibly revised) reply.'''
    prompt = render_self_correction(task_prompt, proposed)
    return complete_with_retries(backend, prompt, retry_policy or RetryPolicy(), params)


def request_reply(backend: ModelBackend, state: EpisodeState, variant: PromptVariant,
                  responses: Sequence[str], retry_policy: RetryPolicy,
                  params: Optional[DecodingParams] = None, final: bool = False) -> Tuple[ParsedResponse, str]:
    '''One agent turn up to a usable, parsed reply.

    A reply naming an already tried object counts as unusable, like a reply
    that cannot be parsed, and does not consume a step.

    Raises:
        ParseFailure: still unusable after `retry_policy.parse_retries` reminders.
        BackendError: the backend kept failing.
    '''
    prompt = render_prompt(state, variant, responses)
    attempt_prompt = prompt
    last_error = None
    for _ in range(retry_policy.parse_retries + 1):
        raw = complete_with_retries(backend, attempt_prompt, retry_policy, params)
        if variant is PromptVariant.SELF_CORRECTION:
            raw = self_correct(attempt_prompt, raw, backend, retry_policy, params)
        try:
            parsed = parse_response(raw, state.config.rule_kind, state.universe, require_action=not final)
        except ParseFailure as error:
            last_error = error
        else:
            if final or parsed.stop or parsed.resolved_object not in state.tried_ids:
                return parsed, raw
            last_error = ParseFailure(f'{parsed.action_phrase!r} was already picked up')
        attempt_prompt = with_reminder(prompt, str(last_error))
    raise ParseFailure(f'no usable reply after {retry_policy.parse_retries + 1} attempts: {last_error}')


def run_agent_episode(backend: ModelBackend, variant: PromptVariant, config: TaskConfig, seed: int,
                      retry_policy: RetryPolicy = None, condition: str = '', episode: int = 0,
                      params: Optional[DecodingParams] = None, verbose: bool = False) -> Trajectory:
    '''Play one episode with a language-model backend.

    Args:
        backend: model to query.
        variant: prompt protocol (base, self-correction, guided, long-context).
        config: task config; the task is generated from (config, seed).
        seed: episode seed.
        retry_policy: parse and backend retry budgets.

    Returns:
        Trajectory with raw replies, parsed fields and the winning combination
        stated after each step. Parse and backend failures end the episode and
        are recorded in `failure`; a stop before any pickup or before the
        observations identify the rule is flagged premature-stop.
    '''
    retry_policy = retry_policy or RetryPolicy()
    started = time.time()
    state = generate_task(config.with_seed(seed))
    hypotheses = enumerate_hypotheses(state.config)
    policy_name = f'llm:{variant.value}'
    trajectory = Trajectory(
        condition=condition or policy_name,
        episode=episode,
        seed=int(seed),
        policy=policy_name,
        config=state.config,
        hidden_rule=state.hidden_rule,
    )
    responses: List[str] = []
    stopped = False
    try:
        while not state.terminated:
            if not state.untried_ids():
                trajectory.failure = EXHAUSTED_UNIVERSE
                trajectory.error = f'all {len(state.universe)} objects tried'
                break
            parsed, raw = request_reply(backend, state, variant, responses, retry_policy, params)
            if trajectory.steps:
                trajectory.steps[-1].winning_combination = parsed.winning_combination
            if parsed.stop:
                stopped = True
                trajectory.final_answer = parsed.winning_combination
                if not state.history or not is_sufficient(hypotheses):
                    trajectory.flags.append(PREMATURE_STOP)
                break
            obj = state.get_object(parsed.resolved_object)
            gain = expected_info_gain(hypotheses, obj)
            reward, state = step(state, obj.id)
            hypotheses = filter_consistent(hypotheses, state.history[-1], obj)
            responses.append(raw)
            trajectory.steps.append(TrajectoryStep(
                step_index=len(state.history),
                object_id=obj.id,
                description=obj.description(),
                reward=reward,
                alive=hypotheses.size,
                eig=gain,
                raw=raw,
                parsed=parsed.to_dict(),
            ))
            if verbose:
                logger.debug(f'{policy_name} seed={seed} step {len(state.history)}: '
                             f'{obj.description()} -> {reward} | alive={hypotheses.size}')

        if not stopped:
            # final-answer turn: the last claim after the budget is spent
            parsed, _ = request_reply(backend, state, variant, responses, retry_policy, params, final=True)
            if trajectory.steps:
                trajectory.steps[-1].winning_combination = parsed.winning_combination
            trajectory.final_answer = parsed.winning_combination
    except (ConfigurationError, TemplateError):
        raise
    except ParseFailure as error:
        trajectory.failure = INVALID_ACTION_ABORT
        trajectory.error = str(error)
        logger.warning(f'{policy_name} seed={seed} aborted: {error}')
    except BackendError as error:
        trajectory.failure = BACKEND_FAILURE
        trajectory.error = str(error)
        logger.warning(f'{policy_name} seed={seed} backend failure: {error}')
    except ExplorationError as error:
        trajectory.failure = trajectory.failure or EPISODE_ERROR
        trajectory.error = f'{type(error).__name__}: {error}'
        logger.warning(f'{policy_name} seed={seed} failed: {trajectory.error}')

    record_sufficiency(trajectory)
    trajectory.wall_clock = {'started': started, 'elapsed_seconds': time.time() - started}
    return trajectory


# DEFINE POLICY ------------------------------------------------------------
class LLMAgent(BasePolicy):
    '''Language-model policy.

    Args:
        backend: a ModelBackend shared by all episodes, or a factory
            `(config, seed) -> ModelBackend` called once per episode.
        variant: prompt protocol.
        retry_policy: parse and backend retry budgets.
        params: decoding settings passed to the backend.
    '''
    def __init__(self, backend: Union[ModelBackend, BackendFactory], variant: PromptVariant = PromptVariant.BASE,
                 retry_policy: RetryPolicy = None, params: DecodingParams = None):
        super().__init__()
        if not isinstance(backend, ModelBackend) and not callable(backend):
            raise ConfigurationError(f'backend must be a ModelBackend or a factory, got {backend!r}')
        self.policy_name = f'llm:{variant.value}'
        self.backend = backend
        self.variant = variant
        self.retry_policy = retry_policy or RetryPolicy()
        self.params = params or DecodingParams()
        self.stop_at_sufficiency = False

    def backend_for(self, config: TaskConfig, seed: int) -> ModelBackend:
        if isinstance(self.backend, ModelBackend):
            return self.backend
        return self.backend(config, seed)

    def decide(self, state, hypotheses, rng):
        '''Single turn without the episode bookkeeping.'''
        backend = self.backend_for(state.config, state.config.seed)
        parsed, raw = request_reply(backend, state, self.variant, (), self.retry_policy, self.params)
        return PolicyDecision(object_id=parsed.resolved_object, rationale=raw, stop=parsed.stop)

    def run_episode(self, config, seed, condition='', episode=0):
        return run_agent_episode(
            self.backend_for(config, seed), self.variant, config, seed,
            retry_policy=self.retry_policy, condition=condition, episode=episode,
            params=self.params, verbose=self.verbose,
        )
