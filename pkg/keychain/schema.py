"""JSON documents for instances, policies and results. Field names are fixed in docs/schema.md."""
import json
import logging
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .exceptions import ValidationError
from .model import NULL, KnownOrderInstance, MultiKeyInstance, Policy, Scenario, ScenarioInstance
from .obm import WeightProfile, WobmInstance
from .order import OrderInstance, OrderPolicy

logger = logging.getLogger(__name__)

KINDS = ('known_order', 'scenarios', 'multi_key', 'order_selection', 'wobm')


class KeychainJSONEncoder(json.JSONEncoder):
    """Numpy values as plain numbers, fractions as "a/b" strings, sets as sorted lists."""

    def default(self, obj):
        if isinstance(obj, Fraction):
            return str(obj) if obj.denominator != 1 else obj.numerator
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, (set, frozenset)):
            return sorted(obj)
        return super().default(obj)


def dumps(document):
    return json.dumps(document, cls=KeychainJSONEncoder, indent=2, sort_keys=True) + '\n'


def _require(document, field, where):
    if not isinstance(document, dict):
        raise ValidationError('{}: expected an object'.format(where or 'document'))
    if field not in document:
        raise ValidationError("{}: field '{}' is required".format(where or 'document', field))
    return document[field]


def _path(where, field):
    return '{}.{}'.format(where, field) if where else field


def parse_probability(value, field):
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError):
            raise ValidationError('{}: cannot read {!r} as a probability'.format(field, value))
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError('{}: expected a number or an "a/b" string, got {!r}'.format(field, value))
    return value


def _probabilities(values, field):
    if not isinstance(values, list):
        raise ValidationError('{}: expected a list'.format(field))
    return tuple(parse_probability(v, '{}[{}]'.format(field, i)) for i, v in enumerate(values))


def _chains(values, field):
    if not isinstance(values, list) or not all(isinstance(c, list) for c in values):
        raise ValidationError('{}: expected a list of key lists'.format(field))
    return tuple(tuple(c) for c in values)


def _integer(value, field):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError('{}: expected an integer, got {!r}'.format(field, value))
    return value


def instance_from_document(document):
    kind = _require(document, 'kind', '')
    if kind not in KINDS:
        raise ValidationError('kind: expected one of {}, got {!r}'.format(', '.join(KINDS), kind))
    if kind == 'wobm':
        support = _require(document, 'support', '')
        if not isinstance(support, list):
            raise ValidationError('support: expected a list')
        profiles = tuple(WeightProfile(_require(p, 'weights', 'support[{}]'.format(s)),
                                       parse_probability(_require(p, 'prob', 'support[{}]'.format(s)),
                                                         'support[{}].prob'.format(s)))
                         for s, p in enumerate(support))
        capacities = _require(document, 'capacities', '')
        if not isinstance(capacities, list):
            raise ValidationError('capacities: expected a list')
        return WobmInstance(tuple(capacities), profiles)

    num_keys = _integer(_require(document, 'num_keys', ''), 'num_keys')
    if kind == 'scenarios':
        raw = _require(document, 'scenarios', '')
        if not isinstance(raw, list):
            raise ValidationError('scenarios: expected a list')
        scenarios = []
        for s, sc in enumerate(raw):
            where = 'scenarios[{}]'.format(s)
            scenarios.append(Scenario(_chains(_require(sc, 'chains', where), _path(where, 'chains')),
                                      _require(sc, 'correct_key', where),
                                      parse_probability(_require(sc, 'prob', where), _path(where, 'prob'))))
        return ScenarioInstance(num_keys, tuple(scenarios))
    chains = _chains(_require(document, 'chains', ''), 'chains')
    if kind == 'multi_key':
        return MultiKeyInstance(num_keys, chains, _require(document, 'mode', ''),
                                _probabilities(_require(document, 'probs', ''), 'probs'))
    prior = _probabilities(_require(document, 'prior', ''), 'prior')
    if kind == 'known_order':
        return KnownOrderInstance(num_keys, chains, prior)
    return OrderInstance(num_keys, chains, prior)


def instance_kind(instance):
    for cls, kind in ((KnownOrderInstance, 'known_order'), (ScenarioInstance, 'scenarios'),
                      (MultiKeyInstance, 'multi_key'), (OrderInstance, 'order_selection'), (WobmInstance, 'wobm')):
        if isinstance(instance, cls):
            return kind
    raise ValidationError('not an instance: {!r}'.format(type(instance).__name__))


def instance_to_document(instance):
    kind = instance_kind(instance)
    if kind == 'wobm':
        return {'kind': kind, 'capacities': list(instance.capacities),
                'support': [{'weights': [list(row) for row in p.weights], 'prob': p.prob} for p in instance.support]}
    document = {'kind': kind, 'num_keys': instance.num_keys}
    if kind == 'scenarios':
        document['scenarios'] = [{'chains': [list(c) for c in sc.chains], 'correct_key': sc.correct_key,
                                  'prob': sc.prob} for sc in instance.scenarios]
        return document
    document['chains'] = [list(c) for c in instance.chains]
    if kind == 'multi_key':
        document.update(mode=instance.mode, probs=list(instance.probs))
    else:
        document['prior'] = list(instance.prior)
    return document


class LoadedInstance(NamedTuple):
    instance: object
    merged_duplicates: int


def read_document(path):
    try:
        with open(path, encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ValidationError('{}: malformed JSON at line {} column {}: {}'.format(path, e.lineno, e.colno, e.msg))
    except OSError as e:
        raise ValidationError('{}: cannot read ({})'.format(path, e.strerror))


def write_document(document, path):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(dumps(document))


def load_instance(path) -> LoadedInstance:
    """Scenario instances come back with byte-identical scenarios merged; the merge count is reported."""
    instance = instance_from_document(read_document(path))
    merged = 0
    if isinstance(instance, ScenarioInstance):
        instance, merged = instance.merge_duplicates()
        if merged:
            logger.warning('%s: merged %d duplicate scenario(s)', path, merged)
    return LoadedInstance(instance, merged)


def save_instance(instance, path):
    write_document(instance_to_document(instance), path)


def _action(k):
    return None if k == NULL else k


def policy_to_document(policy: Policy, forest=None):
    """Scenario policies are written as prefix rules, so they stay meaningful without the forest's numbering."""
    if policy.kind == Policy.KNOWN_ORDER:
        return {'kind': 'policy', 'policy_kind': policy.kind, 'actions': [_action(k) for k in policy.actions]}
    if forest is None:
        raise ValidationError('a scenario policy needs its information forest to be written')
    rules = [{'prefix': [list(c) for c in forest.prefixes[o]], 'key': _action(k)} for o, k in enumerate(policy.actions)]
    return {'kind': 'policy', 'policy_kind': policy.kind, 'rules': rules}


def policy_from_document(document, forest=None) -> Policy:
    if _require(document, 'kind', '') != 'policy':
        raise ValidationError("kind: expected 'policy', got {!r}".format(document['kind']))
    policy_kind = _require(document, 'policy_kind', '')
    if policy_kind == Policy.KNOWN_ORDER:
        actions = _require(document, 'actions', '')
        if not isinstance(actions, list):
            raise ValidationError('actions: expected a list')
        return Policy.known_order(actions)
    if policy_kind != Policy.SCENARIO:
        raise ValidationError('policy_kind: unknown policy kind {!r}'.format(policy_kind))
    if forest is None:
        raise ValidationError('a scenario policy needs its information forest to be read')
    rules = _require(document, 'rules', '')
    if not isinstance(rules, list):
        raise ValidationError('rules: expected a list')
    actions = [NULL] * forest.num_info_sets
    for r, rule in enumerate(rules):
        where = 'rules[{}]'.format(r)
        prefix = tuple(tuple(sorted(c)) for c in _chains(_require(rule, 'prefix', where), _path(where, 'prefix')))
        o = forest.index(prefix)
        if o is None:
            raise ValidationError('{}.prefix: not an information set of the instance'.format(where))
        key = _require(rule, 'key', where)
        actions[o] = NULL if key is None else key
    return Policy.scenario(actions)


def order_policy_to_document(policy: OrderPolicy):
    return {'kind': 'order_policy', 'ordering': list(policy.ordering),
            'selection': [_action(k) for k in policy.selection]}


def order_policy_from_document(document) -> OrderPolicy:
    if _require(document, 'kind', '') != 'order_policy':
        raise ValidationError("kind: expected 'order_policy', got {!r}".format(document['kind']))
    return OrderPolicy(tuple(_require(document, 'ordering', '')), tuple(_require(document, 'selection', '')))
