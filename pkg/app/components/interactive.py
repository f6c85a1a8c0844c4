"""Play one episode by hand, with the hypothesis engine shown alongside."""

# LOAD DEPENDENCY ----------------------------------------------------------
import json
import logging

import numpy as np
import pandas as pd
import streamlit as st

from app.components.environment import EpisodeState, generate_task, step
from app.components.hypothesis import (
    HypothesisSet,
    enumerate_hypotheses,
    expected_info_gain_all,
    filter_consistent,
    is_sufficient,
    posterior_entropy,
)
from app.components.policies.base_policy import policy_rng
from app.components.policies.optimal_policy import optimal_decide
from app.components.utils import widget_functions
from app.components.utils.errors import ExplorationError

logger = logging.getLogger(__name__)


# FUNCTIONS ----------------------------------------------------------------
def build_object_table(state: EpisodeState, hypotheses: HypothesisSet) -> pd.DataFrame:
    '''One row per object: description, whether tried, observed reward and expected information gain.'''
    gains = expected_info_gain_all(hypotheses)
    rewards = {obs.object_id: obs.reward for obs in state.history}
    return pd.DataFrame({
        'object': [obj.id + 1 for obj in state.universe],
        'description': [obj.description() for obj in state.universe],
        'tried': [obj.id in rewards for obj in state.universe],
        'reward': [rewards.get(obj.id, np.nan) for obj in state.universe],
        'expected information gain': np.round(gains, 4),
    })


def episode_key(config, seed) -> str:
    '''Identity of the task an episode was generated from.'''
    return json.dumps({'config': config.to_dict(), 'seed': int(seed)}, sort_keys=True)


def is_stale(session, config, seed) -> bool:
    '''True when no episode is stored or it was generated from other settings.'''
    return 'episode_state' not in session or session.get('episode_key') != episode_key(config, seed)


def new_episode(config, seed):
    state = generate_task(config.with_seed(seed))
    st.session_state['episode_state'] = state
    st.session_state['episode_key'] = episode_key(config, seed)
    st.session_state['hypotheses'] = enumerate_hypotheses(state.config)
    st.session_state['suggest_rng'] = policy_rng(seed)


# MAIN SCRIPT --------------------------------------------------------------
def interactive(verbose=False):
    st.header('Interactive episode')
    with st.sidebar:
        st.write('\n')
        _, config = widget_functions.create_task_widget(key='interactive')
        seed = st.number_input('Episode seed', min_value=0, value=0, step=1)
        show_rule = st.checkbox('Reveal hidden rule')
    if config is None:
        st.stop()

    if st.button('New episode') or is_stale(st.session_state, config, int(seed)):
        new_episode(config, int(seed))
    state = st.session_state['episode_state']
    hypotheses = st.session_state['hypotheses']

    st.write(widget_functions.describe_config(state.config))
    if show_rule:
        st.info(f'Hidden rule: {state.hidden_rule.answer_text()}')

    col1, col2, col3 = st.columns(3)
    col1.metric('Steps', f'{len(state.history)} / {state.budget}')
    col2.metric('Rules alive', hypotheses.size)
    col3.metric('Entropy [bits]', f'{posterior_entropy(hypotheses):.3f}')
    st.dataframe(build_object_table(state, hypotheses))

    if is_sufficient(hypotheses) and state.history:
        st.success(f'Sufficient information: the reward is {hypotheses.alive_rules()[0].answer_text()}')
    if state.terminated:
        st.warning('Budget spent. Start a new episode to play again.')
        st.stop()

    untried = state.untried_ids()
    if not untried:
        st.warning('Every object has been tried.')
        st.stop()
    choice = st.selectbox('Pick up:', untried, format_func=lambda i: state.universe[i].phrase())
    left, right = st.columns(2)
    if left.button('Pick up'):
        try:
            reward, state = step(state, int(choice))
            st.session_state['hypotheses'] = filter_consistent(hypotheses, state.history[-1], state.universe[choice])
            if verbose:
                logger.debug(f'interactive | picked {state.universe[choice].description()} | reward {reward}')
        except ExplorationError as error:
            st.warning(f'❗{error}')
        st.rerun()
    if right.button('Suggest'):
        decision = optimal_decide(state, hypotheses, st.session_state['suggest_rng'])
        if decision.object_id is not None:
            st.info(f'Optimal choice: {state.universe[decision.object_id].phrase()} ({decision.rationale})')
