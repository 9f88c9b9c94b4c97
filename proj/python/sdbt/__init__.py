"""Python front end for the sdbt translator core."""

import json
from importlib import resources

from . import _sdbt
from ._sdbt import REPORT_SCHEMA, WorkloadError

__all__ = ["REPORT_SCHEMA", "WorkloadError", "ablate", "diff_test", "oracle", "run", "rules_path", "workload_path"]

WORKLOADS = ("alu-loop", "membound", "sysmix", "irqstorm", "mixed")


def rules_path():
    return str(resources.files(__package__) / "data" / "starter.rules")


def workload_path(name):
    if name not in WORKLOADS:
        raise ValueError(f"unknown bundled workload {name!r}")
    return str(resources.files(__package__) / "data" / "workloads" / f"{name}.yaml")


def _rows(text):
    return [json.loads(line) for line in text.splitlines() if line]


def run(workload, pipeline="rules", level="scheduling", chaining=True, fuel=0, rules=None):
    """Run one configuration and return its report row."""
    return _rows(_sdbt.run(str(workload), rules or rules_path(), pipeline, level, chaining, fuel))[0]


def ablate(workload, fuel=0, rules=None):
    """Run every optimization level and return the report rows."""
    return _rows(_sdbt.ablate(str(workload), rules or rules_path(), fuel))


def diff_test(seeds=100, start=1, fuel=5000, rules=None):
    """Return mismatch descriptions; an empty list means every program matched."""
    return _sdbt.diff_test(seeds, start, fuel, rules or rules_path())


def oracle(workload):
    return _sdbt.oracle(str(workload))
