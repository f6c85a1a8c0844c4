"""Functions used commonly across different modes of the app."""
# LOAD DEPENDENCY ----------------------------------------------------------
import pandas as pd
import streamlit as st

from app.components.environment import DEFAULT_VOCAB, Factor, TaskConfig
from app.components.utils import config as config_loader
from app.components.utils.errors import ConfigurationError

PRESET_OPTIONS = ['construction-lab', 'text-single-feature', 'text-conjunction', 'Custom']
POLICY_OPTIONS = ['optimal', 'random_without', 'random_with']


# FUNCTIONS ----------------------------------------------------------------
def task_mapping(preset, rule_kind='single_feature', colors=3, shapes=3, textures=3, budget=None):
    '''Task config keys for the selected widgets; a preset ignores the custom fields.'''
    if preset != 'Custom':
        mapping = {'preset': preset}
    else:
        mapping = {'rule_kind': rule_kind, 'colors': colors, 'shapes': shapes}
        if rule_kind == 'conjunction':
            mapping['textures'] = textures
    if budget:
        mapping['budget'] = budget
    return mapping


def create_task_widget(key='task'):
    '''Sidebar widgets for one task config.

    Returns:
        (mapping, TaskConfig) or (mapping, None) with a warning when the
        selection is invalid.
    '''
    preset = st.selectbox('Task preset:', PRESET_OPTIONS, key=f'{key}_preset',
                          help='construction-lab draws 3 colors and 3 shapes per episode with 4 pickups')
    rule_kind, colors, shapes, textures = 'single_feature', 3, 3, 3
    if preset == 'Custom':
        rule_kind = st.selectbox('Reward rule:', ['single_feature', 'conjunction'], key=f'{key}_rule_kind')
        colors = st.number_input('Colors', min_value=1, max_value=len(DEFAULT_VOCAB[Factor.COLOR]), value=3,
                                 key=f'{key}_colors')
        shapes = st.number_input('Shapes', min_value=1, max_value=len(DEFAULT_VOCAB[Factor.SHAPE]), value=3,
                                 key=f'{key}_shapes')
        if rule_kind == 'conjunction':
            textures = st.number_input('Textures', min_value=1, max_value=len(DEFAULT_VOCAB[Factor.TEXTURE]),
                                       value=3, key=f'{key}_textures')
    budget = st.number_input('Pickup budget (0 = one per object)', min_value=0, max_value=500, value=0,
                             key=f'{key}_budget')
    mapping = task_mapping(preset, rule_kind, int(colors), int(shapes), int(textures), int(budget) or None)
    try:
        return mapping, config_loader.task_config_from_mapping(mapping)
    except ConfigurationError as error:
        st.warning(f'❗{error}')
        return mapping, None


def describe_config(config: TaskConfig) -> str:
    sizes = ' x '.join(f'{len(config.vocab[f])} {f.value}s' for f in config.active_factors)
    budget = config.budget if config.budget is not None else 'one per object'
    text = f'{config.rule_kind.value.replace("_", " ")} task, {sizes}, budget {budget}'
    if config.sample_sizes:
        drawn = ', '.join(f'{n} {f.value}s' for f, n in config.sample_sizes.items())
        text += f' (drawing {drawn} per episode)'
    return text


def create_download_button(frame: pd.DataFrame, file_name: str, label: str = 'Download CSV'):
    st.download_button(
        label,
        data=frame.to_csv(index=False).encode('utf-8'),
        file_name=file_name,
        mime='text/csv',
        help='Click here to download the table',
    )
