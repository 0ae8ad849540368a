"""Planner interface and the deterministic template planner."""

from __future__ import annotations

from typing import Protocol

from .plan import NAME_RE, Plan, PlanStep


class Planner(Protocol):
    id: str

    def plan(self, spec, workspace) -> Plan: ...


def param_slugs(params) -> list[str]:
    """Lower-case workspace-safe names for parameters, unique by position."""
    out = []
    for i, p in enumerate(params):
        slug = p.lower()
        if not NAME_RE.match(slug) or slug in out:
            slug = f"p{i}"
        out.append(slug)
    return out


class TemplatePlanner:
    """Fixed recipe: derivatives, pairwise products, index sums, FIM, det, CRBs."""

    id = "template"

    def plan(self, spec, workspace=None) -> Plan:
        steps: list[PlanStep] = []

        def emit(op, inputs, output, **params):
            steps.append(PlanStep(len(steps), op, tuple(inputs), output, params))
            return output

        params = list(spec.params)
        slugs = param_slugs(params)
        dim = len(params)
        roles = {t: spec.role(t) for t in spec.targets}
        targets: dict[str, dict] = {}

        dphi = [emit("differentiate_poly", ["phi"], f"dphi_{s}", wrt=p) for p, s in zip(params, slugs)]
        prods = {}
        for i in range(dim):
            for j in range(i, dim):
                prods[i, j] = emit("mul_poly", [dphi[i], dphi[j]], f"prod_{slugs[i]}_{slugs[j]}")
        sums = {}
        for (i, j), name in prods.items():
            current = name
            for ix in spec.indices:
                current = emit("sum_index", [current], f"sum_{slugs[i]}_{slugs[j]}_{ix.lower()}", index=ix)
            sums[i, j] = current
        fim = emit("assemble_fim", ["gain_sq", "noise", *sums.values()], "fim", dim=dim)

        want_det = dim > 1 or any(r.kind == "det" for r in roles.values())
        det = emit("determinant", [fim], "det_f") if want_det else None
        crbs = {}
        for i, s in enumerate(slugs):
            raw = emit("crb", [fim, det] if det else [fim], f"crb_{s}_raw", param=i)
            crbs[i] = raw
        for i, s in enumerate(slugs):
            crbs[i] = emit("simplify", [crbs[i]], f"crb_{s}")

        for target, role in roles.items():
            if role.kind == "dphi":
                targets[target] = {"value": dphi[role.params[0]]}
            elif role.kind == "fim":
                targets[target] = {"value": fim, "entry": list(role.params)}
            elif role.kind == "det":
                targets[target] = {"value": det}
            else:
                targets[target] = {"value": crbs[role.params[0]]}
        return Plan(tuple(steps), targets, self.id)
