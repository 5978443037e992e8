"""Batch-plant scheduling with neural policies trained by swarm search."""

import json

from . import _core
from ._core import (
    ConfigError,
    DomainError,
    EligibilityError,
    Error,
    LookupError,
    ParseError,
    StateError,
    ValidationError,
    clopper_pearson_lb,
    cvar_estimate,
    experiment_ids,
    forward,
    var_estimate,
)


def instance_summary(name_or_path):
    return json.loads(_core.instance_summary(name_or_path))


def instance(name_or_path):
    """Instance document as a dict (schema_version 1)."""
    return json.loads(_core.instance_json(name_or_path))


def experiment(experiment_id, instance="instance1"):
    return json.loads(_core.experiment_json(experiment_id, instance))


def train(experiment_id, instance="instance1", seed=0, overrides=None, workers=1):
    """Trains a policy. `overrides` maps setting names (pop, iters, omega,
    samples, ...) to values. Returns best_objective, history and the policy
    document."""
    items = [(str(k), str(v)) for k, v in (overrides or {}).items()]
    return json.loads(_core.train(experiment_id, instance, seed, items, workers))


def _policy_text(policy):
    if isinstance(policy, (str, bytes)):
        return policy
    return json.dumps(policy)


def load_policy(path):
    with open(path) as f:
        return json.load(f)


def validate(policy, experiment_id, instance="instance1", n_mc=500, seed=0, workers=1):
    return json.loads(_core.validate(_policy_text(policy), experiment_id, instance, n_mc, seed, workers))


def rollout(policy, instance="instance1", experiment_id="E1", seed=0):
    """One episode; the result includes the schedule and an SVG Gantt chart."""
    return json.loads(_core.rollout(_policy_text(policy), instance, experiment_id, seed))


def latency(policy, instance, steps=1000):
    return json.loads(_core.latency(_policy_text(policy), instance, steps))


__all__ = [
    "ConfigError",
    "DomainError",
    "EligibilityError",
    "Error",
    "LookupError",
    "ParseError",
    "StateError",
    "ValidationError",
    "clopper_pearson_lb",
    "cvar_estimate",
    "experiment",
    "experiment_ids",
    "forward",
    "instance",
    "instance_summary",
    "latency",
    "load_policy",
    "rollout",
    "train",
    "validate",
    "var_estimate",
]
