"""Runs experiment mode where you can run a small sweep of baseline policies and compare them"""

# LOAD DEPENDENCY ----------------------------------------------------------
import logging
import tempfile
import time

import streamlit as st

from app.components import harness, metrics, statistics
from app.components.utils import config as config_loader
from app.components.utils import widget_functions
from app.components.utils.errors import ConfigurationError

logger = logging.getLogger(__name__)


# FUNCTIONS ----------------------------------------------------------------
def build_sweep_mapping(task, policies, episodes, base_seed, out_dir, color_counts=None, jobs=1):
    '''Sweep spec mapping with one condition per selected policy (and color count).'''
    conditions = []
    for policy in policies:
        condition = {
            'name': f'{policy}',
            'policy': policy,
            'episodes': episodes,
            'base_seed': base_seed,
            'task': dict(task),
        }
        if color_counts:
            condition['color_counts'] = list(color_counts)
        conditions.append(condition)
    return {'out_dir': out_dir, 'jobs': jobs, 'conditions': conditions}


# MAIN SCRIPT --------------------------------------------------------------
def experiment(verbose=False):
    st.header('Experiment setting')
    task, config = widget_functions.create_task_widget(key='experiment')
    if config is None:
        st.stop()
    st.write(widget_functions.describe_config(config))

    policies = st.multiselect('Policies to run in this session:', widget_functions.POLICY_OPTIONS,
                              default=widget_functions.POLICY_OPTIONS)
    episodes = st.number_input('Episodes per condition', min_value=1, max_value=5000, value=200)
    base_seed = st.number_input('Base seed', min_value=0, value=0, step=1)
    sweep_colors = st.checkbox('Sweep color count', help='one condition per color count, from the default colors')
    color_counts = st.multiselect('Color counts:', list(range(1, 7)), default=[3, 4, 5]) if sweep_colors else None

    if len(policies) == 0:
        st.warning('❗Please select at least one policy to run.')
        st.stop()

    if st.session_state['train_state'] is False:
        st.session_state['continue_state'] = st.button('Run sweep')
    if st.session_state['continue_state'] is False:
        st.stop()

    while st.session_state['train_state'] is False:
        out_dir = tempfile.mkdtemp(prefix='sweep-')
        mapping = build_sweep_mapping(task, policies, int(episodes), int(base_seed), out_dir, color_counts)
        try:
            spec = config_loader.sweep_spec_from_mapping(mapping)
        except ConfigurationError as error:
            st.warning(f'❗{error}')
            st.stop()
        start_time = time.time()
        with st.spinner('running episodes...'):
            harness.run_sweep(spec, verbose=verbose)
        if verbose:
            logger.debug(f'sweep finished in {time.time() - start_time:.1f}s in {out_dir}')
        st.session_state['sweep_dir'] = out_dir
        st.session_state['train_state'] = True
    st.success('Done!')

    trajectories, _ = harness.load_run(st.session_state['sweep_dir'])
    records = [metrics.score_trajectory(t) for t in trajectories]
    summary = metrics.aggregate(records, group_by=harness.SUMMARY_GROUPS)
    st.write('#### Steps to sufficient information')
    st.dataframe(summary)
    widget_functions.create_download_button(summary, 'summary.csv')

    names = sorted({r.condition for r in records})
    if len(names) >= 2:
        st.write('#### Compare conditions')
        base = st.selectbox('Base condition', names)
        variant = st.selectbox('Variant condition', [n for n in names if n != base])
        for entry in statistics.compare_conditions(records, [(base, variant)]):
            if 'error' in entry:
                st.warning(f'❗{entry["error"]}')
            else:
                st.write(f'{entry["rule_kind"]}: F({entry["df1"]}, {entry["df2"]}) = {entry["F"]:.3f}, '
                         f'p = {entry["p"]:.4g}')

    run_again = st.button('Run again')
    if run_again:
        st.session_state['train_state'] = False
