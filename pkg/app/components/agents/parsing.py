'''Parses model responses written in the prompt's response format.

    * Action: pick up <colored> <object>
    * Stop: <YES> or <NO>
    *
    * Which factor influence reward? <COLOR> or <SHAPE> or <UNSURE>
    * WINNING COMBINATION: <...>

Labels are matched case-insensitively on lines stripped of markdown decoration;
the first occurrence of each label wins.
'''

# LOAD DEPENDENCY ----------------------------------------------------------
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

from app.components.environment import Factor, RuleKind, SceneObject, value_spellings
from app.components.utils.errors import AmbiguousActionError, ParseFailure, UnknownObjectError

UNSURE = 'UNSURE'

_DECORATION = re.compile(r'[*_`#>]')
_BULLET = re.compile(r'^[\s\-•]+')
_TOKEN = re.compile(r'[a-z0-9]+')
_ACTION = re.compile(r'^action\s*:\s*(.*)$', re.IGNORECASE)
_STOP = re.compile(r'^stop\s*:\s*(.*)$', re.IGNORECASE)
_FACTOR = re.compile(r'^which\b[^?]*\?\s*(.*)$', re.IGNORECASE)
_WINNING = re.compile(r'^winning\s+combination\s*:\s*(.*)$', re.IGNORECASE)
_PICK_UP = re.compile(r'^(pick\s+up|pickup|pick)\s+', re.IGNORECASE)


# CLASS OBJECT -------------------------------------------------------------
@dataclass(frozen=True)
class ParsedResponse:
    action_phrase: Optional[str]
    resolved_object: Optional[int]
    stop: bool
    factor_claim: Optional[str]
    winning_combination: Optional[str]
    raw: str

    def to_dict(self) -> Dict:
        return {
            'action_phrase': self.action_phrase,
            'resolved_object': self.resolved_object,
            'stop': self.stop,
            'factor_claim': self.factor_claim,
            'winning_combination': self.winning_combination,
        }


# FUNCTIONS ----------------------------------------------------------------
def tokenize(text: str) -> List[str]:
    return _TOKEN.findall(text.lower())


def clean_line(line: str) -> str:
    return _BULLET.sub('', _DECORATION.sub('', line)).strip()


def labeled_fields(text: str) -> Dict[str, str]:
    '''First value of each labeled line: action, stop, factor, winning.'''
    fields = {}
    for line in text.splitlines():
        line = clean_line(line)
        for key, pattern in (('action', _ACTION), ('stop', _STOP), ('factor', _FACTOR), ('winning', _WINNING)):
            match = pattern.match(line)
            if match and key not in fields:
                fields[key] = match.group(1).strip()
                break
    return fields


def normalize_factor_claim(value: str) -> str:
    '''Canonical claim: "COLOR", "SHAPE", a pair such as "COLOR, TEXTURE", or "UNSURE".'''
    tokens = set(tokenize(value))
    if 'unsure' in tokens:
        return UNSURE
    named = [f.value.upper() for f in Factor if f.value in tokens]
    if not named:
        return UNSURE
    return ', '.join(named)


def resolve_action(phrase: str, rule_kind: RuleKind, universe: Sequence[SceneObject]) -> int:
    '''Id of the only object whose every active-factor value is named in `phrase`.'''
    tokens = set(tokenize(phrase))
    matches = [
        obj.id for obj in universe
        if all(tokens.intersection(value_spellings(f, obj.values[f])) for f in rule_kind.factors)
    ]
    if len(matches) > 1:
        raise AmbiguousActionError(f'{phrase!r} matches {len(matches)} objects')
    if not matches:
        raise UnknownObjectError(f'{phrase!r} matches no object in the scene')
    return matches[0]


def parse_response(text: str, rule_kind: RuleKind, universe: Sequence[SceneObject],
                   require_action: bool = True) -> ParsedResponse:
    '''Extract the labeled lines of a response and resolve its action.

    Args:
        text: raw model response.
        rule_kind: decides which factors an action phrase must name.
        universe: objects of the episode.
        require_action: final-answer turns set this to False; the action line
            is then optional and an unresolvable action is ignored.

    Returns:
        ParsedResponse

    Raises:
        ParseFailure: no Action line (when required).
        AmbiguousActionError: the action names more than one object.
        UnknownObjectError: the action names no object.
    '''
    fields = labeled_fields(text)
    stop = 'yes' in tokenize(fields.get('stop', ''))
    # a stopping reply needs no executable action
    require_action = require_action and not stop
    phrase = fields.get('action')
    if phrase:
        phrase = _PICK_UP.sub('', phrase).strip() or None
    if phrase is None and require_action:
        raise ParseFailure('response has no Action line')

    resolved = None
    if phrase is not None:
        try:
            resolved = resolve_action(phrase, rule_kind, universe)
        except ParseFailure:
            if require_action:
                raise

    factor_claim = normalize_factor_claim(fields['factor']) if 'factor' in fields else None
    return ParsedResponse(
        action_phrase=phrase,
        resolved_object=resolved,
        stop=stop,
        factor_claim=factor_claim,
        winning_combination=fields.get('winning') or None,
        raw=text,
    )
