import re

import numpy as np


class ChoiceEnum(object):
    """ Named string choices. ChoiceEnum((('gcn_focal', 'GCN focal'),)) gives
    an attribute GCN_FOCAL == 'gcn_focal', membership tests on the values
    and a describe() line for help and error text. """

    def __init__(self, choices):
        self._choices = tuple(choices)
        for value, label in self._choices:
            setattr(self, re.sub('[- ]', '_', value.upper()), value)

    def __iter__(self):
        return iter(self._choices)

    def __contains__(self, key):
        return key in self.values()

    def values(self):
        return [v for v, label in self._choices]

    def describe(self):
        return ", ".join("%s (%s)" % c for c in self._choices)


def make_rng(seed):
    """ All randomness goes through numpy's PCG64 generator so that a seed
    means the same stream on every platform. ``seed`` may be an int, a
    ``SeedSequence`` or an existing ``Generator``. """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def spawn_seeds(seed, count):
    """ Independent child streams of ``seed``. Child i is the same no matter
    how many siblings are asked for. """
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(seed)
    return [np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (i,))
            for i in range(count)]


def seed_to_int(seed):
    """ Collapse a SeedSequence into a plain 31-bit int, for libraries (and
    configs) that want an integer. """
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1, dtype=np.uint32)[0] >> 1)
    return int(seed)
