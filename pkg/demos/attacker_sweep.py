"""Small attacker sweep at desk scale, TCLS against the no-trust baseline.

Three seeds keep this under half a minute. The CLI runs the full version:
    python3 -m manetsec --sweep attackers --seeds 10 --out sweep.csv --summarize
"""

from __future__ import annotations

from dataclasses import replace

from manetsec.runner import default_scenario, format_summary, run_sweep, summarize_rows

scenario = replace(default_scenario("desk"), seeds=(0, 1, 2))
rows = run_sweep(scenario, "attackers")
print(format_summary(summarize_rows(rows)))
