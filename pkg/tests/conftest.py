"""Shared fixtures: small task configs used across the test modules"""
import pytest

from app.components.environment import Factor, RuleKind, TaskConfig


def make_config(rule_kind=RuleKind.SINGLE_FEATURE, colors=('red', 'green', 'blue'),
                shapes=('cube', 'disk', 'plank'), textures=('wood', 'plastic', 'steel'), budget=None, seed=0):
    vocab = {Factor.COLOR: tuple(colors), Factor.SHAPE: tuple(shapes)}
    if rule_kind is RuleKind.CONJUNCTION:
        vocab[Factor.TEXTURE] = tuple(textures)
    return TaskConfig(rule_kind=rule_kind, vocab=vocab, budget=budget, seed=seed)


@pytest.fixture
def config_2x2():
    return make_config(colors=('red', 'blue'), shapes=('cube', 'disk'))


@pytest.fixture
def config_3x3():
    return make_config()


@pytest.fixture
def config_conj_2x2x2():
    return make_config(RuleKind.CONJUNCTION, colors=('red', 'blue'), shapes=('cube', 'disk'),
                       textures=('wood', 'steel'))


@pytest.fixture
def config_conj_3x3x3():
    return make_config(RuleKind.CONJUNCTION)
