'''Prompt variants and template rendering for the language-model agent.

Templates are plain-text files under app/templates with `{name}` placeholders.
Only the placeholders in PLACEHOLDERS may appear; substitution is a single pass,
so model text pasted into a prompt is never substituted again.
'''

# LOAD DEPENDENCY ----------------------------------------------------------
import re
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Sequence

from app.components.environment import EpisodeState, RuleKind, history_description, scene_description
from app.components.utils.errors import ConfigurationError, TemplateError

TEMPLATE_DIR = Path(__file__).resolve().parents[2] / 'templates'
PLACEHOLDERS = frozenset({'scene_description', 'action_reward_description', 'task', 'solution'})
PLACEHOLDER_PATTERN = re.compile(r'\{(\w+)\}')

HISTORY_HEADER = 'Your previous actions and rewards:'
RESPONSES_HEADER = 'Your previous responses:'
FORMAT_REMINDER = (
    'Your last response could not be used: {reason}\n'
    'Reply again and end with the requested format, naming exactly one object from the list, e.g.\n'
    '* Action: pick up <object description>\n'
    '* Stop: <YES> or <NO>\n'
    '* WINNING COMBINATION: <your answer>'
)


# CLASS OBJECT -------------------------------------------------------------
class PromptVariant(str, Enum):
    BASE = 'base'
    SELF_CORRECTION = 'self_correction'
    GUIDED_REASONING = 'guided'
    LONG_CONTEXT = 'long_context'

    @classmethod
    def from_name(cls, name: str) -> 'PromptVariant':
        key = name.strip().lower().replace('-', '_')
        aliases = {'guided_reasoning': 'guided', 'self_correct': 'self_correction', 'long': 'long_context'}
        key = aliases.get(key, key)
        for variant in cls:
            if variant.value == key:
                return variant
        raise ConfigurationError(f'prompt variant {name!r} is not defined, use one of {[v.value for v in cls]}')


# FUNCTIONS ----------------------------------------------------------------
def template_name(rule_kind: RuleKind, variant: PromptVariant) -> str:
    prefix = 'guided_' if variant is PromptVariant.GUIDED_REASONING else ''
    return f'{prefix}{rule_kind.value}.txt'


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    path = TEMPLATE_DIR / name
    if not path.is_file():
        raise TemplateError(f'template {name!r} not found in {TEMPLATE_DIR}')
    text = path.read_text(encoding='utf-8')
    check_template(text)
    return text


def check_template(template: str):
    unknown = sorted(set(PLACEHOLDER_PATTERN.findall(template)) - PLACEHOLDERS)
    if unknown:
        raise TemplateError(f'unknown template placeholder(s): {unknown}')


def fill_template(template: str, **values: str) -> str:
    '''Substitute every placeholder of `template` from `values`.

    Example:
        >>> fill_template('TASK: {task}', task='pick up')
        'TASK: pick up'
    '''
    check_template(template)

    def substitute(match):
        key = match.group(1)
        if key not in values:
            raise TemplateError(f'no value given for template placeholder {key!r}')
        return values[key]

    return PLACEHOLDER_PATTERN.sub(substitute, template)


def action_reward_description(state: EpisodeState, variant: PromptVariant = PromptVariant.BASE,
                              responses: Sequence[str] = ()) -> str:
    '''History block of the prompt.

    Base prompts carry actions and rewards only. LongContext additionally
    carries the agent's earlier raw responses in step order, one per executed
    step. An empty history gives an empty block.
    '''
    if not state.history:
        return ''
    block = f'{HISTORY_HEADER}\n{history_description(state)}'
    if variant is PromptVariant.LONG_CONTEXT and responses:
        traces = '\n\n'.join(f'Response at step {k}:\n{text.strip()}' for k, text in enumerate(responses, start=1))
        block = f'{block}\n\n{RESPONSES_HEADER}\n{traces}'
    return block


def render_prompt(state: EpisodeState, variant: PromptVariant = PromptVariant.BASE,
                  responses: Sequence[str] = (), template: str = None) -> str:
    if template is None:
        template = load_template(template_name(state.config.rule_kind, variant))
    return fill_template(
        template,
        scene_description=scene_description(state),
        action_reward_description=action_reward_description(state, variant, responses),
    )


def render_self_correction(task_prompt: str, proposed: str, template: str = None) -> str:
    if template is None:
        template = load_template('self_correction.txt')
    return fill_template(template, task=task_prompt, solution=proposed)


def with_reminder(prompt: str, reason: str) -> str:
    return f'{prompt}\n\n{FORMAT_REMINDER.format(reason=reason)}'
