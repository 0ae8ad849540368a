"""Named fault injections: sabotaged rules and lowered caps."""

from __future__ import annotations

from dataclasses import replace

from ..errors import SchemaError
from ..expr import DEFAULT_RULES, RuleSet

# Below the raw product count of the largest S01 step, above its collected size.
LOW_CAP = 40
LOW_DEGREE = 3

INJECTIONS = ("sign-flip", "low-cap", "degree-cap")


def injected_rules(names, base: RuleSet = DEFAULT_RULES) -> RuleSet:
    rules = base
    for name in names:
        if name == "sign-flip":
            rules = replace(rules, sabotage=rules.sabotage | {"sign-flip"})
        elif name == "low-cap":
            rules = replace(rules, cap=LOW_CAP)
        elif name == "degree-cap":
            rules = replace(rules, max_degree=LOW_DEGREE)
        else:
            raise SchemaError(f"unknown fault injection {name!r}; choose from {', '.join(INJECTIONS)}")
    return rules


def apply_overrides(rules: RuleSet, overrides) -> RuleSet:
    changes = dict(overrides)
    if "sabotage" in changes:
        changes["sabotage"] = frozenset(changes["sabotage"])
    unknown = set(changes) - {"cap", "order", "sabotage", "max_degree"}
    if unknown:
        raise SchemaError(f"unknown rule overrides {sorted(unknown)}")
    return replace(rules, **changes)
