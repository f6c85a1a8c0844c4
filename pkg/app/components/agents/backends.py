'''Model backends: one interface, three implementations.

HttpBackend talks to a hosted model over an OpenAI-compatible chat completions
endpoint. ScriptedBackend replays canned responses for offline runs and tests.
OracleBackend answers every prompt the way the optimal policy would, which lets
the whole agent loop be checked against the baselines without a model.
'''

# LOAD DEPENDENCY ----------------------------------------------------------
import logging
import os
import re
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import requests

from app.components.environment import (
    EpisodeState,
    Factor,
    Observation,
    RuleKind,
    SceneObject,
    TaskConfig,
    value_spellings,
)
from app.components.hypothesis import HypothesisSet, filter_consistent, is_sufficient
from app.components.policies.base_policy import policy_rng
from app.components.policies.optimal_policy import optimal_decide
from app.components.utils.errors import BackendError, ConfigurationError, ExplorationError

logger = logging.getLogger(__name__)

DEFAULT_TOKEN_ENV = 'EXPLORE_API_TOKEN'
SCRIPT_SEPARATOR = re.compile(r'^-{3,}\s*$', re.MULTILINE)


# CLASS OBJECT -------------------------------------------------------------
@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.0
    max_tokens: int = 2048


# ABSTRACT CLASS -----------------------------------------------------------
class ModelBackend(ABC):
    '''Implements ModelBackend which is an abstract class to be inherited by all backends.

    Implementations must be safe to call from several threads at once.
    '''
    def __init__(self):
        self.name = 'base'

    @abstractmethod
    def complete(self, prompt: str, params: Optional[DecodingParams] = None) -> str:
        pass

    def __repr__(self):
        return f'{type(self).__name__}({self.name!r})'


# DEFINE BACKEND -----------------------------------------------------------
class HttpBackend(ModelBackend):
    '''Hosted model behind an OpenAI-compatible `/chat/completions` endpoint.

    Args:
        url: base url of the service, e.g. "https://host/v1".
        model: model name sent with every request.
        token_env: environment variable holding the bearer token.
        timeout: seconds per request.
        max_in_flight: concurrent requests allowed across threads.
    '''
    def __init__(self, url: str, model: str, token_env: str = DEFAULT_TOKEN_ENV,
                 timeout: float = 120.0, max_in_flight: int = 4, session: requests.Session = None):
        super().__init__()
        if not url or not model:
            raise ConfigurationError('http backend needs both `url` and `model`')
        if max_in_flight < 1:
            raise ConfigurationError(f'max_in_flight must be >= 1, got {max_in_flight}')
        self.name = model
        self.url = url.rstrip('/') + '/chat/completions'
        self.model = model
        self.token_env = token_env
        self.timeout = timeout
        self.session = session or requests.Session()
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def _headers(self) -> Dict[str, str]:
        headers = {'Content-Type': 'application/json'}
        token = os.environ.get(self.token_env)
        if token:
            headers['Authorization'] = f'Bearer {token}'
        return headers

    def complete(self, prompt, params=None):
        params = params or DecodingParams()
        body = {
            'model': self.model,
            'messages': [{'role': 'user', 'content': prompt}],
            'temperature': params.temperature,
            'max_tokens': params.max_tokens,
        }
        with self._slots:
            try:
                response = self.session.post(self.url, json=body, headers=self._headers(), timeout=self.timeout)
                response.raise_for_status()
                payload = response.json()
            except requests.RequestException as error:
                raise BackendError(f'{self.model}: request failed: {error}') from error
            except ValueError as error:
                raise BackendError(f'{self.model}: response is not JSON') from error
        try:
            return payload['choices'][0]['message']['content'] or ''
        except (KeyError, IndexError, TypeError) as error:
            raise BackendError(f'{self.model}: unexpected response body') from error


class ScriptedBackend(ModelBackend):
    '''Returns canned responses in order; records every prompt it receives.'''
    def __init__(self, responses: Sequence[str], repeat_last: bool = False, name: str = 'scripted'):
        super().__init__()
        self.name = name
        self.responses = list(responses)
        self.repeat_last = repeat_last
        self.prompts: List[str] = []
        self._index = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path, repeat_last: bool = False) -> 'ScriptedBackend':
        '''Load responses from a text file, one response per `---` separated block.'''
        text = Path(path).read_text(encoding='utf-8')
        responses = [block.strip() for block in SCRIPT_SEPARATOR.split(text) if block.strip()]
        return cls(responses, repeat_last=repeat_last, name=Path(path).stem)

    def complete(self, prompt, params=None):
        with self._lock:
            self.prompts.append(prompt)
            if self._index < len(self.responses):
                response = self.responses[self._index]
                self._index += 1
                return response
            if self.repeat_last and self.responses:
                return self.responses[-1]
        raise BackendError(f'{self.name}: script exhausted after {len(self.responses)} responses')


class OracleBackend(ModelBackend):
    '''Answers like the optimal policy, reading everything it needs from the prompt.

    The scene lines ("Object k: a red cube") give the universe and the history
    lines ("Step k: pick up red cube, reward: 1") give the observations. Tie
    breaking draws from the same decision stream as the optimal baseline, so an
    oracle-driven agent episode reproduces the baseline trajectory for the
    same seed.

    Args:
        rule_kind: rule kind of the episodes it will answer.
        vocab: label pool per factor; every label appearing in a scene must be in it.
        seed: episode seed, used for tie breaking.
    '''
    _SCENE_LINE = re.compile(r'^Object\s+(\d+):\s+an?\s+(.+?)\s*$', re.MULTILINE)
    _STEP_LINE = re.compile(r'^Step\s+(\d+):\s+pick up\s+(.+?),\s+reward:\s*([01])\s*$', re.MULTILINE)
    _SOLUTION = '\nSOLUTION: '

    def __init__(self, rule_kind: RuleKind, vocab: Mapping[Factor, Sequence[str]], seed: int = 0):
        super().__init__()
        self.name = 'oracle'
        self.rule_kind = rule_kind
        self.vocab = {f: tuple(vocab[f]) for f in rule_kind.factors}
        self.seed = seed
        self.rng = policy_rng(seed)
        self._lock = threading.Lock()
        self._words = {
            spelling: (factor, label)
            for factor, labels in self.vocab.items()
            for label in labels
            for spelling in value_spellings(factor, label)
        }

    def _values(self, description: str) -> Dict[Factor, str]:
        values = {}
        for word in description.lower().split():
            if word not in self._words:
                raise BackendError(f'oracle: unknown word {word!r} in {description!r}')
            factor, label = self._words[word]
            values[factor] = label
        return values

    def _universe(self, prompt: str) -> List[SceneObject]:
        universe = []
        for number, description in self._SCENE_LINE.findall(prompt):
            universe.append(SceneObject(id=int(number) - 1, values=self._values(description)))
        if not universe:
            raise BackendError('oracle: prompt has no scene description')
        return universe

    def _history(self, prompt: str, universe: List[SceneObject]) -> List[Observation]:
        by_description = {obj.description(): obj.id for obj in universe}
        history = []
        for number, description, reward in self._STEP_LINE.findall(prompt):
            if description not in by_description:
                raise BackendError(f'oracle: history names unknown object {description!r}')
            history.append(Observation(by_description[description], int(reward), int(number)))
        return history

    def complete(self, prompt, params=None):
        if self._SOLUTION in prompt:
            # self-correction prompt: accept the proposed solution
            return prompt.split(self._SOLUTION, 1)[1].strip()

        universe = self._universe(prompt)
        history = self._history(prompt, universe)
        vocab = {
            f: tuple(label for label in self.vocab[f] if any(obj.values.get(f) == label for obj in universe))
            for f in self.rule_kind.factors
        }
        hypotheses = HypothesisSet.from_universe(self.rule_kind, vocab, universe)
        try:
            for obs in history:
                hypotheses = filter_consistent(hypotheses, obs, universe[obs.object_id])
        except ExplorationError as error:
            raise BackendError(f'oracle: {error}') from error

        # rewards are read from the prompt, the hidden rule slot only needs a valid rule
        state = EpisodeState(
            config=TaskConfig(rule_kind=self.rule_kind, vocab=vocab, budget=len(universe)),
            universe=universe,
            hidden_rule=hypotheses.alive_rules()[0],
            history=history,
        )
        sufficient = is_sufficient(hypotheses)
        with self._lock:
            try:
                decision = optimal_decide(state, hypotheses, self.rng)
            except ExplorationError:
                decision = None
            answer = hypotheses.alive_rules()[0].answer_text() if sufficient else 'UNSURE'
        return format_response(
            obj=universe[decision.object_id] if decision and decision.object_id is not None else None,
            stop=sufficient and bool(history),
            factor_claim=hypotheses.alive_rules()[0].factors if sufficient else None,
            winning_combination=answer,
        )


# FUNCTIONS ----------------------------------------------------------------
def format_response(obj: Optional[SceneObject], stop: bool, factor_claim, winning_combination: str) -> str:
    '''Response in the prompt's requested format.'''
    action = obj.description() if obj is not None else 'nothing'
    claim = ', '.join(f.value.upper() for f in factor_claim) if factor_claim else 'UNSURE'
    return (
        f'* Action: pick up {action}\n'
        f'* Stop: {"YES" if stop else "NO"}\n'
        '*\n'
        f'* Which factor influence reward? {claim}\n'
        f'* WINNING COMBINATION: {winning_combination}'
    )


def create_backend(spec: Optional[Mapping], rule_kind: RuleKind = None, vocab=None, seed: int = 0) -> ModelBackend:
    '''Build a backend from a config block: {"kind": "http"|"scripted"|"oracle", ...}.'''
    spec = dict(spec or {})
    kind = spec.pop('kind', 'oracle')
    if kind == 'http':
        allowed = {'url', 'model', 'token_env', 'timeout', 'max_in_flight'}
        unknown = set(spec) - allowed
        if unknown:
            raise ConfigurationError(f'unknown http backend option(s): {sorted(unknown)}')
        return HttpBackend(url=spec.pop('url', None), model=spec.pop('model', None), **spec)
    if kind == 'scripted':
        if 'path' not in spec:
            raise ConfigurationError('scripted backend needs `path`')
        return ScriptedBackend.from_file(spec['path'], repeat_last=bool(spec.get('repeat_last', False)))
    if kind == 'oracle':
        if rule_kind is None or vocab is None:
            raise ConfigurationError('oracle backend needs the episode rule kind and vocabulary')
        return OracleBackend(rule_kind, vocab, seed=seed)
    raise ConfigurationError(f'backend kind {kind!r} is not defined')
