"""Cross-checking the aligner against the oracle on generated instances."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .aligner import SearchConfig, SoundnessError, align, validate_alignment
from .model import Model, Trace, serialize_model
from .oracle import InstanceSpec, brute_force_align, generate_instance, remaining_cost

ABLATIONS: dict[str, dict] = {
    "on": {},
    "no_ep": {"early_pruning": False},
    "no_cp": {"chain_preprocessing": False},
    "no_gf": {"grouped_fixes": False},
    "off": {"early_pruning": False, "chain_preprocessing": False, "grouped_fixes": False},
}
TOGGLES = {"no_ep": "EP", "no_cp": "CP", "no_gf": "GF"}


@dataclass
class RunInfo:
    status: str
    cost: float | None
    expanded: int
    discovered: int


@dataclass
class InstanceReport:
    seed: int
    trace: tuple[str, ...]
    model: str
    oracle_cost: float | None
    runs: dict[str, RunInfo] = field(default_factory=dict)
    validity_failures: list[str] = field(default_factory=list)
    admissibility_checked: int = 0
    admissibility_violations: list[str] = field(default_factory=list)

    @property
    def cost_match(self) -> bool:
        main = self.runs["on"]
        return main.status in ("ok", "unsat") and main.cost == self.oracle_cost

    @property
    def ablation_costs_agree(self) -> bool:
        return len({(r.status, r.cost) for r in self.runs.values()}) == 1

    def nonmonotone(self, name: str) -> bool:
        """Whether switching the optimization off expanded fewer states."""
        return name in self.runs and self.runs["on"].expanded > self.runs[name].expanded


def check_instance(
    t: Trace,
    m: Model,
    seed: int = 0,
    max_cost: float = 6,
    configs: dict[str, dict] | None = None,
    admissibility: bool = True,
    timeout: float = 120.0,
) -> InstanceReport:
    configs = ABLATIONS if configs is None else configs
    oracle = brute_force_align(t, m, max_cost)
    rep = InstanceReport(seed, tuple(t), serialize_model(m), oracle.cost if oracle else None)
    if oracle is not None:
        rep.validity_failures += [f"oracle: {p}" for p in validate_alignment(oracle, tuple(t), m)]
    for name, kw in configs.items():
        seen = []
        observer = seen.append if admissibility else None
        cfg = SearchConfig(max_cost=max_cost, timeout_seconds=timeout, **kw)
        try:
            r = align(t, m, cfg, observer)
        except SoundnessError as e:
            rep.runs[name] = RunInfo("error", None, 0, 0)
            rep.validity_failures.append(f"{name}: {e}")
            continue
        rep.runs[name] = RunInfo(r.status, r.cost, r.stats.expanded_states, r.stats.discovered_states)
        if r.alignment is not None:
            rep.validity_failures += [f"{name}: {p}" for p in validate_alignment(r.alignment, tuple(t), m)]
        for s in seen:
            rep.admissibility_checked += 1
            h = s.heuristic
            # a completion cheaper than h (within budget) refutes admissibility
            budget = max_cost - s.cost if math.isinf(h) else h - 1e-9
            if budget < 0:
                continue
            rest = remaining_cost(s.graph, m, cfg.cost_function, budget)
            if rest < h - 1e-9:
                rep.admissibility_violations.append(f"{name}: h={h} > remaining={rest} at cost {s.cost}")
    return rep


def _check_spec(args) -> InstanceReport:
    spec, max_cost, configs, admissibility = args
    t, m = generate_instance(spec)
    return check_instance(t, m, spec.seed, max_cost, configs, admissibility)


@dataclass
class SuiteReport:
    reports: list[InstanceReport]

    @property
    def mismatches(self) -> list[InstanceReport]:
        return [r for r in self.reports if not r.cost_match]

    @property
    def validity_failures(self) -> list[str]:
        return [f for r in self.reports for f in r.validity_failures]

    @property
    def admissibility_checked(self) -> int:
        return sum(r.admissibility_checked for r in self.reports)

    @property
    def admissibility_violations(self) -> list[str]:
        return [v for r in self.reports for v in r.admissibility_violations]

    @property
    def ablation_cost_changes(self) -> list[InstanceReport]:
        return [r for r in self.reports if not r.ablation_costs_agree]

    def nonmonotone(self, name: str) -> list[InstanceReport]:
        return [r for r in self.reports if r.nonmonotone(name)]

    def failures(self, cp_tolerance: float = 0.05) -> int:
        n = len(self.mismatches) + len(self.validity_failures) + len(self.admissibility_violations)
        n += len(self.ablation_cost_changes)
        n += len(self.nonmonotone("no_ep")) + len(self.nonmonotone("no_gf"))
        if self.reports and len(self.nonmonotone("no_cp")) > cp_tolerance * len(self.reports):
            n += len(self.nonmonotone("no_cp"))
        return n

    def summary_lines(self) -> list[str]:
        lines = [
            f"instances: {len(self.reports)}",
            f"cost mismatches: {len(self.mismatches)}",
            f"validity failures: {len(self.validity_failures)}",
            f"admissibility: {len(self.admissibility_violations)} violations over {self.admissibility_checked} states",
            f"ablation cost changes: {len(self.ablation_cost_changes)}",
        ]
        for name, label in TOGGLES.items():
            if any(name in r.runs for r in self.reports):
                lines.append(f"{label} non-monotone instances: {len(self.nonmonotone(name))}")
        lines.append(f"failures: {self.failures()}")
        return lines


def suite_specs(n: int, seed: int, **bounds) -> list[InstanceSpec]:
    return [InstanceSpec(seed=seed * 100_003 + k, **bounds) for k in range(n)]


def run_suite(
    n: int,
    seed: int,
    max_cost: float = 6,
    configs: dict[str, dict] | None = None,
    admissibility: bool = True,
    jobs: int = 1,
    **bounds,
) -> SuiteReport:
    args = [(spec, max_cost, configs, admissibility) for spec in suite_specs(n, seed, **bounds)]
    if jobs <= 1:
        reports = [_check_spec(a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_check_spec, args, chunksize=4))
    return SuiteReport(reports)


# Small instances on which one optimization strictly shrinks the search:
# (label, toggle, model text, trace).
FIGURE_CASES = [
    ("early pruning", "early_pruning", "End(B)\nAlternateSuccession(B, C)\nInit(C)\n", ("A", "B")),
    ("chain preprocessing", "chain_preprocessing", "NotChainSuccession(B, C)\nExistence(1, C)\n", ("B", "A")),
    ("grouped fixes", "grouped_fixes", "NotCoExistence(A, B)\n", ("A", "A", "B", "B")),
]


def figure_reductions() -> list[tuple[str, RunInfo, RunInfo]]:
    """Run each figure case with its optimization on and off."""
    from .model import parse_model

    out = []
    for label, toggle, text, trace in FIGURE_CASES:
        m = parse_model(text)
        runs = []
        for on in (True, False):
            r = align(trace, m, SearchConfig(**{toggle: on}))
            runs.append(RunInfo(r.status, r.cost, r.stats.expanded_states, r.stats.discovered_states))
        out.append((label, runs[0], runs[1]))
    return out
