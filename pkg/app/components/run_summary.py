"""Summarizes a finished run directory and checks it by replay"""

# LOAD DEPENDENCY ----------------------------------------------------------
import pandas as pd
import streamlit as st

from app.components import harness, metrics
from app.components.utils import widget_functions
from app.components.utils.errors import ConfigurationError


# MAIN SCRIPT --------------------------------------------------------------
@st.cache_data
def load_summary(run_dir):
    trajectories, errors = harness.load_run(run_dir)
    records = [metrics.score_trajectory(t) for t in trajectories]
    summary = metrics.aggregate(records, group_by=harness.SUMMARY_GROUPS)
    return summary, metrics.exploitation_table(records), errors


def run_summary(run_dir=None):
    st.header('Run Summary')
    run_dir = st.text_input('Run directory', value=run_dir or 'runs/latest',
                            help='directory written by `python -m app run`')
    try:
        summary, exploitation, errors = load_summary(run_dir)
    except ConfigurationError as error:
        st.warning(f'❗{error}')
        st.stop()

    if errors:
        st.warning(f'❗{len(errors)} unreadable trajectory line(s)')
        st.dataframe(pd.DataFrame(errors))
    if summary.empty:
        st.info('No trajectories found.')
        st.stop()

    st.write('#### Steps to sufficient information')
    st.dataframe(summary)
    widget_functions.create_download_button(summary, 'summary.csv')

    if not exploitation.empty:
        st.write('#### Exploitation: share of correct claims after each step')
        st.line_chart(exploitation.pivot(index='step', columns='condition', values='mean'))

    if st.button('Replay check'):
        with st.spinner('re-simulating trajectories...'):
            result = harness.replay_verify(run_dir)
        if result.ok:
            st.success(f'{result.checked} trajectories replayed, no mismatches')
        else:
            st.warning(f'❗{len(result.mismatches)} mismatch(es), {len(result.errors)} error(s)')
            st.dataframe(pd.DataFrame(result.mismatches + result.errors))
