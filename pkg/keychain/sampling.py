# Scenario samplers: black-box access to the prior for the sample-based solver
import logging
from time import sleep

import requests

from . import PACKAGE_NAME, PACKAGE_VERSION
from .exceptions import SamplerError, ValidationError
from .model import Scenario, ScenarioInstance, canonical_chains, sampling_probabilities

logger = logging.getLogger(__name__)

SAMPLER_HEADER = {"user-agent": f"{PACKAGE_NAME}-version-{PACKAGE_VERSION}-sampler"}
MAX_BATCH_SIZE = 10_000


class PriorSampler:
    """Draws i.i.d. scenarios from an explicit instance."""

    def __init__(self, instance: ScenarioInstance):
        self.instance = instance
        self.probs = sampling_probabilities(instance.probabilities())

    def draw(self, count, rng):
        ids = rng.choice(self.instance.num_scenarios, size=count, p=self.probs)
        return [self.instance.scenarios[s] for s in ids]


class HttpScenarioSampler:
    """Fetches batches of draws from ``GET url?count=..&seed=..``.

    The endpoint answers ``{"draws": [{"chains": [[...], ...], "correct_key": k}, ...]}``.
    A 400 means the request itself is wrong and is not retried; any other
    failure is retried ``number_of_retries`` times, ``retry_timeout`` seconds apart.
    """

    def __init__(self,
                 url,
                 num_keys,
                 network_timeout=10.0,
                 number_of_retries=4,
                 retry_timeout=2,
                 batch_size=MAX_BATCH_SIZE):
        if number_of_retries < 1:
            raise ValidationError('number_of_retries must be at least 1')
        self.url = url
        self.num_keys = num_keys
        self.network_timeout = network_timeout
        self.number_of_retries = number_of_retries
        self.retry_timeout = retry_timeout
        self.batch_size = batch_size
        self.requests_session = requests.Session()

    def draw(self, count, rng):
        draws = []
        while len(draws) < count:
            size = min(self.batch_size, count - len(draws))
            draws.extend(self._fetch(size, int(rng.integers(2 ** 31))))
        return draws

    def _fetch(self, count, seed):
        for current_try in range(self.number_of_retries):
            try:
                response = self.requests_session.get(
                    self.url, params={'count': count, 'seed': seed},
                    headers=SAMPLER_HEADER, timeout=self.network_timeout)
            except requests.RequestException as e:
                logger.warning('Got exception while fetching draws, Try (%s/%s). Message: %s',
                               current_try + 1, self.number_of_retries, e)
            else:
                if response.status_code == 200:
                    return self._parse(response, count)
                if response.status_code == 400:
                    raise SamplerError('sampler rejected the request: {}'.format(response.text))
                logger.info('Got %s while fetching draws, Try (%s/%s). Response: %s',
                            response.status_code, current_try + 1, self.number_of_retries, response.text)
            if current_try + 1 < self.number_of_retries:
                sleep(self.retry_timeout)
        raise SamplerError('could not fetch draws from {} after {} tries'.format(self.url, self.number_of_retries))

    def _parse(self, response, count):
        try:
            raw = response.json()['draws']
            draws = [Scenario(canonical_chains(d['chains'], self.num_keys), int(d['correct_key']), None)
                     for d in raw]
            if any(not 0 <= d.correct_key < self.num_keys for d in draws):
                raise ValidationError('correct_key out of range')
        except (ValueError, KeyError, TypeError, ValidationError) as e:
            raise SamplerError('malformed sampler response: {}'.format(e))
        if len(draws) != count:
            raise SamplerError('sampler returned {} draws, expected {}'.format(len(draws), count))
        logger.debug('fetched %d draws', count)
        return draws
