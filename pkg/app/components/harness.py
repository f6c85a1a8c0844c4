'''Experiment orchestration: sweeps, persistence, replay verification and reports.

A run directory holds one `<condition>.jsonl` per condition (a header line, then
one trajectory per line), `<condition>.error.json` for a condition that could
not run, and the report outputs `summary.csv`, `exploitation.csv` and
`ancova.json`.
'''

# LOAD DEPENDENCY ----------------------------------------------------------
import json
import logging
from contextlib import ExitStack
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import pandas as pd
from joblib import Parallel, delayed, effective_n_jobs

from app.components import metrics, statistics
from app.components.agents.backends import OracleBackend, ScriptedBackend, create_backend
from app.components.environment import Observation, TaskConfig, generate_task, reward_of
from app.components.hypothesis import enumerate_hypotheses, filter_consistent, sufficiency_step
from app.components.policies.base_policy import BasePolicy, create_policy
from app.components.trajectory import (
    BACKEND_FAILURE,
    Trajectory,
    check_header,
    header_record,
)
from app.components.utils.config import Condition, SweepSpec
from app.components.utils.errors import ConfigurationError, ExplorationError, SchemaError

logger = logging.getLogger(__name__)

SUMMARY_GROUPS = ('condition', 'policy', 'rule_kind', 'n_colors')


# CLASS OBJECT -------------------------------------------------------------
@dataclass
class RunOutcome:
    out_dir: Path
    episodes: Dict[str, int] = field(default_factory=dict)
    failed: Dict[str, str] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return 1 if self.failed else 0


@dataclass
class ReplayReport:
    checked: int = 0
    mismatches: List[Dict] = field(default_factory=list)
    errors: List[Dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches and not self.errors

    def to_dict(self) -> Dict:
        return {'checked': self.checked, 'mismatches': self.mismatches, 'errors': self.errors}


# FUNCTIONS ----------------------------------------------------------------
def _backend_factory(spec: SweepSpec):
    '''Backend (or per-episode backend factory) for the llm conditions of a sweep.'''
    block = dict(spec.backend or {})
    kind = block.get('kind', 'oracle')
    if kind == 'oracle':
        return lambda config, seed: OracleBackend(config.rule_kind, config.vocab, seed=seed)
    if kind == 'scripted' and Path(block.get('path', '')).is_dir():
        # one script per episode, named after its seed
        directory = Path(block['path'])
        return lambda config, seed: ScriptedBackend.from_file(directory / f'{seed}.txt')
    if kind == 'http':
        block.setdefault('max_in_flight', spec.max_in_flight)
    return create_backend(block)


def build_policy(condition: Condition, spec: SweepSpec, backend=None) -> BasePolicy:
    if condition.policy.startswith('llm:'):
        return create_policy(condition.policy, backend=backend or _backend_factory(spec), retry_policy=spec.retry)
    return create_policy(condition.policy)


def _play(policy: BasePolicy, condition: Condition, episode: int) -> Trajectory:
    return policy.run_episode(condition.task, condition.seed_of(episode), condition=condition.name, episode=episode)


def worker_kind(condition: Condition) -> str:
    # model-backed episodes wait on I/O
    return 'threads' if condition.policy.startswith('llm:') else 'processes'


class WorkerPools:
    '''One joblib pool per worker kind, kept alive across the conditions of a sweep.'''
    def __init__(self, jobs: int = 1):
        self.n_jobs = effective_n_jobs(jobs)
        self.pools: Dict[str, Parallel] = {}
        self._stack = ExitStack()

    def get(self, kind: str) -> Parallel:
        if kind not in self.pools:
            self.pools[kind] = self._stack.enter_context(Parallel(n_jobs=self.n_jobs, prefer=kind))
        return self.pools[kind]

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.pools.clear()
        return self._stack.__exit__(*exc)


def run_condition(condition: Condition, policy: BasePolicy, jobs: int = 1,
                  pools: WorkerPools = None) -> List[Trajectory]:
    '''All episodes of one condition, in episode order.'''
    tasks = (delayed(_play)(policy, condition, episode) for episode in range(condition.episodes))
    if pools is not None:
        return pools.get(worker_kind(condition))(tasks)
    n_jobs = min(effective_n_jobs(jobs), condition.episodes)
    return Parallel(n_jobs=n_jobs, prefer=worker_kind(condition))(tasks)


def trajectory_line(trajectory: Trajectory, include_wall_clock: bool = True) -> str:
    return json.dumps(trajectory.to_dict(include_wall_clock=include_wall_clock), sort_keys=True)


def write_condition(out_dir: Path, condition: Condition, trajectories: Sequence[Trajectory]) -> Path:
    path = out_dir / f'{condition.name}.jsonl'
    with open(path, 'w', encoding='utf-8') as file:
        file.write(json.dumps(header_record(condition.to_dict()), sort_keys=True) + '\n')
        for trajectory in trajectories:
            file.write(trajectory_line(trajectory) + '\n')
    return path


def run_sweep(spec: SweepSpec, backend=None, verbose: bool = False) -> RunOutcome:
    '''Run every condition and write its trajectory file.

    A condition that raises, or whose every episode ends in a backend failure,
    is recorded in `<condition>.error.json` and in `RunOutcome.failed`; the
    other conditions are unaffected. Configuration errors stop the sweep.
    '''
    spec.validate()
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outcome = RunOutcome(out_dir=out_dir)
    with WorkerPools(spec.jobs) as pools:
        for condition in spec.conditions:
            logger.info(f'{condition.name}: {condition.episodes} episode(s) of {condition.policy}')
            error_path = out_dir / f'{condition.name}.error.json'
            try:
                policy = build_policy(condition, spec, backend)
                policy.verbose = verbose
                trajectories = run_condition(condition, policy, pools=pools)
            except ConfigurationError:
                raise
            except (ExplorationError, OSError) as error:
                message = f'{type(error).__name__}: {error}'
                logger.error(f'{condition.name} failed: {message}')
                outcome.failed[condition.name] = message
                error_path.write_text(json.dumps({'condition': condition.name, 'error': message}, indent=2))
                continue

            write_condition(out_dir, condition, trajectories)
            outcome.episodes[condition.name] = len(trajectories)
            if trajectories and all(t.failure == BACKEND_FAILURE for t in trajectories):
                message = f'all {len(trajectories)} episodes ended in a backend failure'
                outcome.failed[condition.name] = message
                error_path.write_text(json.dumps({'condition': condition.name, 'error': message}, indent=2))
                logger.error(f'{condition.name}: {message}')
            elif error_path.exists():
                error_path.unlink()
    return outcome


def read_condition_file(path) -> Tuple[Dict, List[Trajectory], List[Dict]]:
    '''Header, parsed trajectories and per-line schema errors of one trajectory file.'''
    path = Path(path)
    trajectories, errors = [], []
    with open(path, 'r', encoding='utf-8') as file:
        lines = file.read().splitlines()
    if not lines:
        raise SchemaError(f'{path.name}: empty trajectory file')
    try:
        header = json.loads(lines[0])
        check_header(header)
    except (ValueError, AttributeError) as error:
        raise SchemaError(f'{path.name}: unreadable header') from error
    for line_number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            trajectories.append(Trajectory.from_dict(json.loads(line)))
        except (ValueError, SchemaError) as error:
            errors.append({'file': path.name, 'line': line_number, 'error': str(error)})
    return header, trajectories, errors


def condition_files(run_dir) -> List[Path]:
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ConfigurationError(f'run directory {run_dir} not found')
    return sorted(run_dir.glob('*.jsonl'))


def load_run(run_dir) -> Tuple[List[Trajectory], List[Dict]]:
    trajectories, errors = [], []
    for path in condition_files(run_dir):
        try:
            _, found, line_errors = read_condition_file(path)
        except SchemaError as error:
            errors.append({'file': path.name, 'line': 1, 'error': str(error)})
            continue
        trajectories.extend(found)
        errors.extend(line_errors)
    return trajectories, errors


def verify_trajectory(trajectory: Trajectory, condition: Condition) -> List[Dict]:
    '''Mismatches between a recorded trajectory and a re-simulation of its actions.

    Rewards, descriptions, alive counts and the sufficiency step are recomputed
    from the regenerated task, so a single corrupted reward gives exactly one
    mismatch.
    '''
    def mismatch(field_name, step_index, recorded, expected):
        return {'condition': trajectory.condition, 'episode': trajectory.episode, 'step': step_index,
                'field': field_name, 'recorded': recorded, 'expected': expected}

    state = generate_task(condition.task.with_seed(trajectory.seed))
    found = []
    if state.hidden_rule != trajectory.hidden_rule:
        found.append(mismatch('hidden_rule', None, trajectory.hidden_rule.to_dict(), state.hidden_rule.to_dict()))
    if state.config.to_dict() != trajectory.config.to_dict():
        found.append(mismatch('config', None, trajectory.config.to_dict(), state.config.to_dict()))
        return found

    hypotheses = enumerate_hypotheses(state.config)
    observations = []
    for s in trajectory.steps:
        if not 0 <= s.object_id < len(state.universe):
            found.append(mismatch('object_id', s.step_index, s.object_id, None))
            return found
        obj = state.universe[s.object_id]
        reward = reward_of(state.hidden_rule, obj)
        obs = Observation(object_id=obj.id, reward=reward, step_index=len(observations) + 1)
        observations.append(obs)
        hypotheses = filter_consistent(hypotheses, obs, obj)
        if s.description != obj.description():
            found.append(mismatch('description', s.step_index, s.description, obj.description()))
        if s.reward != reward:
            found.append(mismatch('reward', s.step_index, s.reward, reward))
        if s.alive != hypotheses.size:
            found.append(mismatch('alive', s.step_index, s.alive, hypotheses.size))

    if trajectory.steps_to_sufficiency is not None:
        step_found = sufficiency_step(observations, enumerate_hypotheses(state.config))
        expected = step_found if step_found is not None else trajectory.budget
        if trajectory.steps_to_sufficiency != expected:
            found.append(mismatch('steps_to_sufficiency', None, trajectory.steps_to_sufficiency, expected))
    return found


def replay_verify(run_dir) -> ReplayReport:
    report = ReplayReport()
    for path in condition_files(run_dir):
        try:
            header, trajectories, errors = read_condition_file(path)
            condition = condition_from_header(header)
        except SchemaError as error:
            report.errors.append({'file': path.name, 'line': 1, 'error': str(error)})
            continue
        report.errors.extend(errors)
        for trajectory in trajectories:
            report.checked += 1
            report.mismatches.extend(verify_trajectory(trajectory, condition))
    logger.info(f'replay: {report.checked} trajectories, {len(report.mismatches)} mismatch(es), '
                f'{len(report.errors)} error(s)')
    return report


def condition_from_header(header: Dict) -> Condition:
    record = header.get('condition') or {}
    try:
        return Condition(
            name=str(record['name']),
            policy=str(record['policy']),
            episodes=int(record['episodes']),
            base_seed=int(record['base_seed']),
            task=TaskConfig.from_dict(record['task']),
        )
    except (KeyError, TypeError, ValueError, ConfigurationError) as error:
        raise SchemaError(f'invalid condition in header: {error!r}') from error


def report(run_dir, pairs: Sequence[Tuple[str, str]] = (), out_dir=None) -> Tuple[pd.DataFrame, List[Dict]]:
    '''Write summary.csv, exploitation.csv and, for requested pairs, ancova.json.

    Returns:
        (summary table, comparison entries)
    '''
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    trajectories, errors = load_run(run_dir)
    for error in errors:
        logger.warning(f'{error["file"]}:{error["line"]}: {error["error"]}')
    records = [metrics.score_trajectory(t) for t in trajectories]

    summary = metrics.aggregate(records, group_by=SUMMARY_GROUPS)
    summary.to_csv(out_dir / 'summary.csv', index=False)
    metrics.exploitation_table(records).to_csv(out_dir / 'exploitation.csv', index=False)

    comparisons = []
    if pairs:
        present = {r.condition for r in records}
        for base, variant in pairs:
            for name in (base, variant):
                if name not in present:
                    logger.warning(f'condition {name!r} not found in {run_dir}')
        comparisons = statistics.compare_conditions(records, pairs)
        with open(out_dir / 'ancova.json', 'w', encoding='utf-8') as file:
            json.dump(comparisons, file, indent=2, sort_keys=True)
    return summary, comparisons
