"""Published benchmark numbers, transcribed by hand for report-layout checks.

These values are inputs to the renderer only; nothing here is computed.
"""

from __future__ import annotations

from statler.eval_harness import DomainResult, Rate, SplitCell, SuiteMetrics

AGENTS = ("baseline", "statler")
DOMAINS = ("pick_place", "disinfection", "weight")

STEPS_AND_SUCCESS = {
    "baseline": {
        "pick_place": DomainResult(0.54, Rate(0, 20)),
        "disinfection": DomainResult(0.68, Rate(0, 20)),
        "weight": DomainResult(0.84, Rate(0, 20)),
    },
    "statler": {
        "pick_place": DomainResult(0.88, Rate(10, 20)),
        "disinfection": DomainResult(0.82, Rate(8, 20)),
        "weight": DomainResult(0.93, Rate(11, 20)),
    },
}

# (non-temporal, temporal) as (k, n) pairs.
INDIVIDUAL = {
    "baseline": {"pick_place": ((62, 62), (9, 29)), "disinfection": ((148, 149), (1, 20)),
                 "weight": ((107, 107), (0, 20))},
    "statler": {"pick_place": ((68, 68), (48, 58)), "disinfection": ((164, 168), (15, 23)),
                "weight": ((107, 107), (11, 20))},
}
COLLECTIVE = {
    "baseline": {"pick_place": ((62, 62), (9, 28)), "disinfection": ((148, 149), (0, 18)),
                 "weight": ((107, 107), (0, 20))},
    "statler": {"pick_place": ((62, 62), (24, 28)), "disinfection": ((147, 149), (11, 18)),
                "weight": ((107, 107), (11, 20))},
}


def _cells(table):
    return {a: {d: SplitCell(Rate(*nt), Rate(*t)) for d, (nt, t) in per.items()} for a, per in table.items()}


def transcribed_metrics() -> SuiteMetrics:
    return SuiteMetrics(AGENTS, DOMAINS, STEPS_AND_SUCCESS,
                        {"individual": _cells(INDIVIDUAL), "collective": _cells(COLLECTIVE)})
