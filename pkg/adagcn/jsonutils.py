""" JSON in and out for manifests, metrics, splits and specs. Anything with
a to_jsondata() method serializes itself. """
from datetime import datetime, timezone

import json

import numpy as np


TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%S"


def utc_now():
    return datetime.now(timezone.utc).replace(microsecond=0, tzinfo=None)


class Encoder(json.JSONEncoder):
    def default(self, obj):
        if hasattr(obj, 'to_jsondata'):
            return obj.to_jsondata()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.generic):
            return obj.item()
        if isinstance(obj, (set, frozenset)):
            return sorted(obj)
        if isinstance(obj, datetime):
            return obj.strftime(TIMESTAMP_FORMAT)
        return super(Encoder, self).default(obj)


def dump(obj, fp, **kw):
    kw.setdefault('cls', Encoder)
    return json.dump(obj, fp, **kw)


def dumps(obj, **kw):
    kw.setdefault('cls', Encoder)
    return json.dumps(obj, **kw)


def write_json(path, obj):
    """ Sorted, indented, newline-terminated; returns path. """
    with open(path, 'w', encoding='utf-8') as f:
        dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def read_json(path):
    """ Raises OSError or ValueError; callers turn those into their own
    errors. """
    with open(path, encoding='utf-8') as f:
        return json.load(f)
