'''Explore-Lab: interactive front-end for measuring exploration efficiency

Example:
    To run the streamlit app please use:
        $ streamlit run main.py

    To pass command line options use:
        $ streamlit run main.py -- --h
        $ streamlit run main.py -- --run_dir runs/latest -v

    Sweeps, replay checks and reports are also available without the front-end:
        $ python -m app --help
'''
# LOAD DEPENDENCY ----------------------------------------------------------
import argparse
import logging

import streamlit as st

from app.components import experiment
from app.components import interactive
from app.components import run_summary

APP_MODES = ['Run Summary', 'Interactive', 'Experiment']


# MAIN SCRIPT --------------------------------------------------------------
def reset_session_state(verbose=False):
    '''Resets the session state when app mode changes.
    Session State is an internal Streamlit method used to share variables between reruns.
    '''
    if verbose:
        logging.getLogger(__name__).debug(
            f'session status | current mode: {st.session_state["app_mode"]} | '
            f'previous mode: {st.session_state["prev_app_mode"]}'
            )

    if st.session_state['prev_app_mode'] != st.session_state['app_mode']:
        for states in ['continue_state', 'train_state']:
            st.session_state[states] = False
    # update state record
    st.session_state['prev_app_mode'] = st.session_state['app_mode']

def main(run_dir=None, verbose=False):
    '''main file for running streamlit

    Args:
        run_dir (str, optional):
            Run directory preselected in the Run Summary mode.
            Defaults to None.
        verbose (bool, optional):
            Logs per-step decisions and session status.

    Returns:
        None
    '''
    # Introduction
    st.title('Explore-Lab: How efficiently does an agent explore?')
    st.write('An agent picks up objects to find out which property earns a reward. '
             'This app plays and scores such episodes for an optimal explorer, random explorers '
             'and language-model agents, and reports the number of steps each needs '
             'to gather sufficient information.')

    # Sidebar
    st.sidebar.title('Start Options')

    # initialize session state
    for states in ['continue_state', 'train_state']:
        if states not in st.session_state:
            st.session_state[states] = False
    for states in ['app_mode', 'prev_app_mode']:
        if states not in st.session_state:
            st.session_state[states] = APP_MODES[0]
    # select app mode and refresh session state on change
    app_mode = st.sidebar.selectbox(
            'Select mode',
            APP_MODES,
            key='app_mode',
            on_change=reset_session_state,
            kwargs={'verbose': verbose}
        )
    # run selected app mode
    if app_mode == 'Run Summary':
        run_summary.run_summary(run_dir)
    elif app_mode == 'Interactive':
        interactive.interactive(verbose=verbose)
    elif app_mode == 'Experiment':
        experiment.experiment(verbose=verbose)


if __name__ == '__main__':
    # custom command line options using argparse
    parser = argparse.ArgumentParser()
    parser.add_argument(
        '-r', '--run_dir',
        action='store',
        help='run directory to open in the Run Summary mode')
    parser.add_argument(
        '-v', '--verbose',
        action='store_true',
        help='print detailed status on command line')
    args = parser.parse_args()
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    logging.getLogger(__name__).info(f'Running command line arguments: {vars(args)}')
    main(run_dir=args.run_dir, verbose=args.verbose)
