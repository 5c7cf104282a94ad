"""Plain-text file formats: instances and configs (key = value) and result CSVs.

Key/value files hold one ``key = value`` pair per line; ``#`` starts a
comment. Array values are whitespace-separated. Floats are written with
``repr`` so every value round-trips exactly.

Instance file keys: ``name``, ``family`` (``polynomial`` or ``poisson``),
``K``, ``r_min``, ``r_max``, ``B``, ``U`` and one array per process
parameter (``mean_coef``, ``exponent``, ``noise``, ``cap`` for the
polynomial family; ``rate`` for the Poisson family).
"""

from __future__ import annotations

import csv
import inspect
from pathlib import Path

import numpy as np

from .policy import ProblemInstance
from .processes import FAMILIES

TRIAL_FIELDS = ["trial", "algo", "update_index", "sim_time", "J", "regret_cum"]
AGGREGATE_FIELDS = ["algo", "sim_time", "J_mean", "J_stderr", "n"]


def _fmt(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_fmt(x) for x in v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_keyvalue(path, items, header=None):
    lines = [f"# {header}"] if header else []
    lines += [f"{k} = {_fmt(v)}" for k, v in items.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_keyvalue(path):
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def parse_floats(text):
    return np.array([float(x) for x in text.split()], dtype=float)


def save_instance(instance, path):
    families = {p.family for p in instance.processes}
    if len(families) != 1:
        raise ValueError("only single-family instances can be saved")
    family = families.pop()
    items = {"name": instance.name or "instance", "family": family, "K": instance.K,
             "r_min": instance.r_min, "r_max": instance.r_max, "B": instance.B, "U": instance.U}
    for key in instance.processes[0].get_params():
        items[key] = [p.get_params()[key] for p in instance.processes]
    write_keyvalue(path, items, header="syncbandit instance")


def load_instance(path):
    kv = read_keyvalue(path)
    try:
        family = kv["family"]
        cls = FAMILIES[family]
    except KeyError as exc:
        raise ValueError(f"{path}: missing or unknown family") from exc
    K = int(kv["K"])
    names = inspect.signature(cls).parameters
    arrays = {name: parse_floats(kv[name]) for name in names if name in kv}
    for name, arr in arrays.items():
        if len(arr) != K:
            raise ValueError(f"{path}: '{name}' has {len(arr)} values, expected K={K}")
    processes = [cls(**{name: float(arr[k]) for name, arr in arrays.items()}) for k in range(K)]
    return ProblemInstance(processes, float(kv["r_min"]), float(kv["r_max"]), float(kv["B"]),
                           U=float(kv["U"]) if "U" in kv else None, name=kv.get("name", ""))


def write_trials_csv(path, rows):
    """``rows``: iterable of dicts with the :data:`TRIAL_FIELDS` keys."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRIAL_FIELDS)
        for row in rows:
            w.writerow([row["trial"], row["algo"], row["update_index"], repr(float(row["sim_time"])),
                        repr(float(row["J"])), repr(float(row["regret_cum"]))])


def read_trials_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, TRIAL_FIELDS, path)
        return [{"trial": int(r["trial"]), "algo": r["algo"], "update_index": int(r["update_index"]),
                 "sim_time": float(r["sim_time"]), "J": float(r["J"]),
                 "regret_cum": float(r["regret_cum"])} for r in reader]


def write_aggregate_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(AGGREGATE_FIELDS)
        for row in rows:
            w.writerow([row["algo"], repr(float(row["sim_time"])), repr(float(row["J_mean"])),
                        repr(float(row["J_stderr"])), int(row["n"])])


def read_aggregate_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, AGGREGATE_FIELDS, path)
        return [{"algo": r["algo"], "sim_time": float(r["sim_time"]), "J_mean": float(r["J_mean"]),
                 "J_stderr": float(r["J_stderr"]), "n": int(r["n"])} for r in reader]


def _check_header(found, expected, path):
    if list(found or []) != expected:
        raise ValueError(f"{path}: expected columns {expected}, found {found}")
