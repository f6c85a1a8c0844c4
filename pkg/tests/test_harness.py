"""Tests sweep configs, trajectory persistence, replay verification, reports and the CLI"""
import json

import numpy as np
import pandas as pd
import pytest
import yaml
from joblib import Parallel

from app.cli import main
from app.components import harness
from app.components.environment import Factor, RuleKind
from app.components.trajectory import BACKEND_FAILURE, SCHEMA_NAME
from app.components.utils import config as config_loader
from app.components.utils.errors import ConfigurationError

TASK_3X3 = {'rule_kind': 'single_feature', 'colors': ['red', 'green', 'blue'], 'shapes': ['cube', 'disk', 'plank']}


def sweep(out_dir, episodes=20, **extra):
    mapping = {
        'out_dir': str(out_dir),
        'conditions': [
            {'name': 'optimal', 'policy': 'optimal', 'episodes': episodes, 'task': TASK_3X3},
            {'name': 'random_with', 'policy': 'random_with', 'episodes': episodes, 'task': TASK_3X3},
        ],
    }
    mapping.update(extra)
    return config_loader.sweep_spec_from_mapping(mapping)


def read_lines(path):
    return path.read_text().splitlines()


def without_wall_clock(line):
    record = json.loads(line)
    record.pop('wall_clock', None)
    return record


# CONFIG -------------------------------------------------------------------
def test_presets():
    lab = config_loader.task_config_from_mapping({'preset': 'construction-lab'})
    assert lab.budget == 4
    assert lab.sample_sizes == {Factor.COLOR: 3, Factor.SHAPE: 3}
    assert len(lab.vocab[Factor.COLOR]) == 6
    text = config_loader.task_config_from_mapping({'preset': 'text-conjunction'})
    assert text.rule_kind is RuleKind.CONJUNCTION
    assert text.universe_size == 6 * 5 * 3
    # explicit keys override the preset
    assert config_loader.task_config_from_mapping({'preset': 'construction-lab', 'budget': 6}).budget == 6


def test_vocabulary_forms():
    config = config_loader.task_config_from_mapping({'colors': 'red, blue', 'shapes': 2})
    assert config.vocab[Factor.COLOR] == ('red', 'blue')
    assert config.vocab[Factor.SHAPE] == ('cylinder', 'cube')


@pytest.mark.parametrize('mapping', [
    {'preset': 'moon-base'},
    {'rule_kind': 'disjunction'},
    {'textures': 3},
    {'colors': 12},
    {'budget': 0},
    {'budget': 'four'},
    {'flavor': 'sweet'},
    {'sample': {'colors': 9}},
])
def test_invalid_task_mappings(mapping):
    with pytest.raises(ConfigurationError):
        config_loader.task_config_from_mapping(mapping)


def test_load_sweep_spec_from_yaml(tmp_path):
    path = tmp_path / 'sweep.yaml'
    path.write_text(yaml.safe_dump({
        'out_dir': str(tmp_path / 'runs'),
        'jobs': 2,
        'conditions': [
            {'policy': 'random_without', 'episodes': 5, 'task': {'preset': 'construction-lab'}},
            {'name': 'colors', 'policy': 'optimal', 'episodes': 5, 'color_counts': [3, 4],
             'task': {'rule_kind': 'conjunction', 'shapes': 2, 'textures': 2}},
        ],
    }))
    spec = config_loader.load_sweep_spec(path)
    assert spec.jobs == 2
    assert [c.name for c in spec.conditions] == ['random_without-single_feature', 'colors-c3', 'colors-c4']
    assert [len(c.task.vocab[Factor.COLOR]) for c in spec.conditions[1:]] == [3, 4]
    assert spec.conditions[0].seed_of(3) == 3


@pytest.mark.parametrize('mapping', [
    {'conditions': []},
    {'conditions': [{'policy': 'optimal', 'episodes': 0}]},
    {'conditions': [{'policy': 'optimal', 'name': 'x'}, {'policy': 'random_with', 'name': 'x'}]},
    {'conditions': [{'policy': 'clever'}]},
    {'conditions': [{'policy': 'llm:base'}]},
    {'conditions': [{'policy': 'optimal', 'name': 'has space'}]},
    {'conditions': [{'policy': 'optimal'}], 'jobs': 0},
    {'conditions': [{'policy': 'optimal'}], 'retry': {'patience': 3}},
    {'conditions': [{'policy': 'optimal'}], 'output': 'x'},
])
def test_invalid_sweeps(mapping):
    with pytest.raises(ConfigurationError):
        config_loader.sweep_spec_from_mapping(mapping)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError):
        config_loader.load_yaml(tmp_path / 'missing.yaml')


# RUN AND PERSIST ----------------------------------------------------------
def test_run_writes_one_file_per_condition(tmp_path):
    outcome = harness.run_sweep(sweep(tmp_path / 'run'))
    assert outcome.exit_code == 0
    assert outcome.episodes == {'optimal': 20, 'random_with': 20}
    lines = read_lines(tmp_path / 'run' / 'optimal.jsonl')
    assert len(lines) == 21
    header = json.loads(lines[0])
    assert header['schema'] == SCHEMA_NAME
    assert header['condition']['name'] == 'optimal'
    records = [json.loads(line) for line in lines[1:]]
    assert [r['episode'] for r in records] == list(range(20))
    assert [r['seed'] for r in records] == list(range(20))
    trajectories, errors = harness.load_run(tmp_path / 'run')
    assert len(trajectories) == 40 and errors == []


def test_runs_are_reproducible(tmp_path):
    harness.run_sweep(sweep(tmp_path / 'a'))
    harness.run_sweep(sweep(tmp_path / 'b', jobs=2))
    for name in ('optimal.jsonl', 'random_with.jsonl'):
        a = [without_wall_clock(line) for line in read_lines(tmp_path / 'a' / name)[1:]]
        b = [without_wall_clock(line) for line in read_lines(tmp_path / 'b' / name)[1:]]
        assert a == b


def test_sweep_reuses_one_pool_per_worker_kind(tmp_path, monkeypatch):
    created = []

    class RecordingParallel(Parallel):
        def __init__(self, *args, **kwargs):
            super().__init__(*args, **kwargs)
            created.append(kwargs.get('prefer'))

    monkeypatch.setattr(harness, 'Parallel', RecordingParallel)
    spec = config_loader.sweep_spec_from_mapping({
        'out_dir': str(tmp_path / 'run'),
        'backend': {'kind': 'oracle'},
        'conditions': [
            {'name': 'optimal', 'policy': 'optimal', 'episodes': 5, 'task': TASK_3X3},
            {'name': 'random_with', 'policy': 'random_with', 'episodes': 5, 'task': TASK_3X3},
            {'name': 'oracle', 'policy': 'llm:base', 'episodes': 3, 'task': TASK_3X3},
        ],
    })
    outcome = harness.run_sweep(spec)
    assert outcome.episodes == {'optimal': 5, 'random_with': 5, 'oracle': 3}
    assert created == ['processes', 'threads']


def test_seeds_give_independent_episodes(tmp_path):
    task = {'rule_kind': 'conjunction', 'colors': 3, 'shapes': 3, 'textures': 2}
    spec = config_loader.sweep_spec_from_mapping({
        'out_dir': str(tmp_path / 'run'),
        'conditions': [
            {'name': 'low', 'policy': 'random_without', 'episodes': 300, 'base_seed': 0, 'task': task},
            {'name': 'high', 'policy': 'random_without', 'episodes': 300, 'base_seed': 10000, 'task': task},
        ],
    })
    harness.run_sweep(spec)
    trajectories, _ = harness.load_run(tmp_path / 'run')
    steps = {
        name: [t.steps_to_sufficiency for t in sorted(trajectories, key=lambda t: t.episode) if t.condition == name]
        for name in ('low', 'high')
    }
    assert abs(np.corrcoef(steps['low'], steps['high'])[0, 1]) < 0.2


def test_llm_condition_with_oracle_backend(tmp_path):
    spec = config_loader.sweep_spec_from_mapping({
        'out_dir': str(tmp_path / 'run'),
        'backend': {'kind': 'oracle'},
        'jobs': 2,
        'conditions': [
            {'name': 'optimal', 'policy': 'optimal', 'episodes': 10, 'task': TASK_3X3},
            {'name': 'oracle', 'policy': 'llm:base', 'episodes': 10, 'task': TASK_3X3},
        ],
    })
    assert harness.run_sweep(spec).exit_code == 0
    trajectories, _ = harness.load_run(tmp_path / 'run')
    picks = {(t.condition, t.episode): [s.object_id for s in t.steps] for t in trajectories}
    for episode in range(10):
        assert picks[('oracle', episode)] == picks[('optimal', episode)]
    assert harness.replay_verify(tmp_path / 'run').ok


def test_failing_backend_marks_condition(tmp_path):
    script = tmp_path / 'empty.txt'
    script.write_text('')
    spec = config_loader.sweep_spec_from_mapping({
        'out_dir': str(tmp_path / 'run'),
        'backend': {'kind': 'scripted', 'path': str(script)},
        'retry': {'backend_retries': 0, 'backoff_seconds': 0},
        'conditions': [
            {'name': 'optimal', 'policy': 'optimal', 'episodes': 3, 'task': TASK_3X3},
            {'name': 'model', 'policy': 'llm:base', 'episodes': 3, 'task': TASK_3X3},
        ],
    })
    outcome = harness.run_sweep(spec)
    assert outcome.exit_code == 1
    assert list(outcome.failed) == ['model']
    assert (tmp_path / 'run' / 'model.error.json').exists()
    trajectories, _ = harness.load_run(tmp_path / 'run')
    assert all(t.failure == BACKEND_FAILURE for t in trajectories if t.condition == 'model')
    assert len([t for t in trajectories if t.condition == 'optimal']) == 3


def test_scripted_backend_directory(tmp_path):
    scripts = tmp_path / 'scripts'
    scripts.mkdir()
    for seed in range(2):
        (scripts / f'{seed}.txt').write_text('* Action: pick up red cube\n* Stop: NO\n---\n* Stop: YES\n')
    spec = config_loader.sweep_spec_from_mapping({
        'out_dir': str(tmp_path / 'run'),
        'backend': {'kind': 'scripted', 'path': str(scripts)},
        'conditions': [{'name': 'scripted', 'policy': 'llm:base', 'episodes': 2, 'task': TASK_3X3}],
    })
    harness.run_sweep(spec)
    trajectories, _ = harness.load_run(tmp_path / 'run')
    assert [[s.description for s in t.steps] for t in trajectories] == [['red cube'], ['red cube']]


# REPLAY -------------------------------------------------------------------
def test_replay_of_clean_run(tmp_path):
    harness.run_sweep(sweep(tmp_path / 'run'))
    report = harness.replay_verify(tmp_path / 'run')
    assert report.ok
    assert report.checked == 40


def test_replay_finds_a_flipped_reward(tmp_path):
    harness.run_sweep(sweep(tmp_path / 'run'))
    path = tmp_path / 'run' / 'random_with.jsonl'
    lines = read_lines(path)
    record = json.loads(lines[5])
    record['steps'][0]['reward'] = 1 - record['steps'][0]['reward']
    lines[5] = json.dumps(record)
    path.write_text('\n'.join(lines) + '\n')

    report = harness.replay_verify(tmp_path / 'run')
    assert len(report.mismatches) == 1
    mismatch = report.mismatches[0]
    assert (mismatch['condition'], mismatch['episode'], mismatch['field'], mismatch['step']) == \
        ('random_with', record['episode'], 'reward', 1)


def test_replay_reports_unreadable_lines(tmp_path):
    harness.run_sweep(sweep(tmp_path / 'run', episodes=3))
    path = tmp_path / 'run' / 'optimal.jsonl'
    path.write_text(path.read_text() + '{"condition": "optimal"}\n')
    report = harness.replay_verify(tmp_path / 'run')
    assert report.checked == 6
    assert report.mismatches == []
    assert [e['line'] for e in report.errors] == [5]


def test_replay_of_missing_directory(tmp_path):
    with pytest.raises(ConfigurationError):
        harness.replay_verify(tmp_path / 'nowhere')


# REPORT -------------------------------------------------------------------
def test_report_tables(tmp_path):
    harness.run_sweep(sweep(tmp_path / 'run', episodes=30))
    summary, comparisons = harness.report(tmp_path / 'run', pairs=[('optimal', 'random_with')])
    assert summary['condition'].tolist() == ['optimal', 'random_with']
    assert summary['n'].tolist() == [30, 30]
    written = pd.read_csv(tmp_path / 'run' / 'summary.csv')
    assert written['condition'].tolist() == ['optimal', 'random_with']
    assert (tmp_path / 'run' / 'exploitation.csv').exists()
    ancova = json.loads((tmp_path / 'run' / 'ancova.json').read_text())
    assert ancova == comparisons
    assert comparisons[0]['rule_kind'] == 'single_feature'
    assert comparisons[0]['df1'] == 1 and comparisons[0]['df2'] == 58


def test_report_with_single_group_pair(tmp_path):
    harness.run_sweep(sweep(tmp_path / 'run', episodes=5))
    _, comparisons = harness.report(tmp_path / 'run', pairs=[('optimal', 'absent')], out_dir=tmp_path / 'report')
    assert 'error' in comparisons[0]
    assert (tmp_path / 'report' / 'summary.csv').exists()


# CLI ----------------------------------------------------------------------
def test_cli_run_replay_report(tmp_path):
    out = tmp_path / 'cli'
    assert main(['run', '--policy', 'optimal', '--preset', 'construction-lab', '--episodes', '5',
                 '--out', str(out)]) == 0
    assert (out / 'optimal-single_feature.jsonl').exists()
    assert (out / 'summary.csv').exists()
    assert main(['replay-verify', str(out)]) == 0
    assert main(['report', str(out)]) == 0


def test_cli_config_file(tmp_path):
    path = tmp_path / 'sweep.yaml'
    path.write_text(yaml.safe_dump({'conditions': [{'policy': 'random_with', 'episodes': 3, 'task': TASK_3X3}]}))
    out = tmp_path / 'cli'
    assert main(['run', '--config', str(path), '--out', str(out)]) == 0
    assert len(read_lines(out / 'random_with-single_feature.jsonl')) == 4


def test_cli_exit_codes(tmp_path):
    assert main(['run', '--policy', 'optimal', '--episodes', '0', '--out', str(tmp_path / 'x')]) == 2
    assert main(['run', '--config', str(tmp_path / 'missing.yaml')]) == 2
    assert main(['report', str(tmp_path / 'missing'), '--compare', 'optimal']) == 2

    harness.run_sweep(sweep(tmp_path / 'run', episodes=2))
    path = tmp_path / 'run' / 'optimal.jsonl'
    lines = read_lines(path)
    record = json.loads(lines[1])
    record['steps'][0]['description'] = 'purple pyramid'
    lines[1] = json.dumps(record)
    path.write_text('\n'.join(lines) + '\n')
    assert main(['replay-verify', str(tmp_path / 'run')]) == 1
