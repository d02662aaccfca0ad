# -*- coding: utf-8 -*-
import json
from pathlib import Path

import numpy as np


def import_json(json_file):
    """Import json and convert it to a dictionary."""
    with open(json_file) as jsonfile:
        file_dict = json.load(jsonfile)
        return file_dict


def _to_builtin(value):
    """Convert numpy scalars and arrays so `json` can serialize them."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def export_json(data, json_file):
    """Write a dictionary to a json file with sorted keys."""
    with open(json_file, 'w') as jsonfile:
        json.dump(data, jsonfile, indent=4, sort_keys=True, default=_to_builtin)


def dumps_record(record):
    """Serialize one record as a single json line (no trailing newline)."""
    return json.dumps(record, sort_keys=True, default=_to_builtin)
