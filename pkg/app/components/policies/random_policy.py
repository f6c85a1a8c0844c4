"""Implements the random baselines, with and without replacement."""
# LOAD DEPENDENCY ----------------------------------------------------------
import numpy as np

from app.components.environment import EpisodeState
from app.components.policies.base_policy import BasePolicy, PolicyDecision
from app.components.utils.errors import ExhaustedUniverseError


# FUNCTIONS ----------------------------------------------------------------
def random_with_replacement_decide(state: EpisodeState, rng: np.random.Generator) -> PolicyDecision:
    # no memory: any object, repeats included
    if len(state.universe) == 0:
        raise ExhaustedUniverseError('empty universe')
    return PolicyDecision(object_id=int(rng.integers(len(state.universe))))


def random_without_replacement_decide(state: EpisodeState, rng: np.random.Generator) -> PolicyDecision:
    untried = state.untried_ids()
    if not untried:
        raise ExhaustedUniverseError(f'all {len(state.universe)} objects already tried')
    return PolicyDecision(object_id=int(untried[int(rng.integers(len(untried)))]))


# DEFINE POLICY ------------------------------------------------------------
class RandomWithReplacementPolicy(BasePolicy):
    """Limited-memory lower bound: may pick the same object again."""
    def __init__(self):
        super().__init__()
        self.policy_name = 'random_with'
        self.allow_repeats = True

    def decide(self, state, hypotheses, rng):
        return random_with_replacement_decide(state, rng)


class RandomWithoutReplacementPolicy(BasePolicy):
    """Perfect-memory lower bound: never repeats an object."""
    def __init__(self):
        super().__init__()
        self.policy_name = 'random_without'

    def decide(self, state, hypotheses, rng):
        return random_without_replacement_decide(state, rng)
