"""Implements the optimal baseline: greedy one-step expected information gain."""
# LOAD DEPENDENCY ----------------------------------------------------------
import numpy as np

from app.components.environment import EpisodeState
from app.components.hypothesis import HypothesisSet, expected_info_gain_all, is_sufficient
from app.components.policies.base_policy import BasePolicy, PolicyDecision
from app.components.utils.errors import ExhaustedUniverseError

# gains closer than this are ties
TIE_TOLERANCE = 1e-12


# FUNCTIONS ----------------------------------------------------------------
def optimal_decide(state: EpisodeState, hypotheses: HypothesisSet, rng: np.random.Generator) -> PolicyDecision:
    '''Pick an untried object of maximal expected information gain.

    Ties are broken uniformly with `rng`. The decision carries stop=True when
    the hypothesis set is already sufficient; it still names a candidate object
    when one is left, since an episode never stops before its first pick.
    '''
    sufficient = is_sufficient(hypotheses)
    untried = np.array(state.untried_ids(), dtype=int)
    if len(untried) == 0:
        if sufficient:
            return PolicyDecision(object_id=None, rationale='sufficient', stop=True)
        raise ExhaustedUniverseError(f'all {len(state.universe)} objects tried with {hypotheses.size} rules alive')

    gains = expected_info_gain_all(hypotheses)[untried]
    best = gains.max()
    candidates = untried[np.abs(gains - best) <= TIE_TOLERANCE]
    choice = int(candidates[int(rng.integers(len(candidates)))])
    return PolicyDecision(object_id=choice, rationale=f'expected information gain {best:.4f} bits', stop=sufficient)


# DEFINE POLICY ------------------------------------------------------------
class OptimalPolicy(BasePolicy):
    """Maximizes information gain at each step and stops at sufficiency."""
    def __init__(self):
        super().__init__()
        self.policy_name = 'optimal'

    def decide(self, state, hypotheses, rng):
        return optimal_decide(state, hypotheses, rng)
