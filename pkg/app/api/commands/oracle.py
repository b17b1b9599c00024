"""``oracle``: Sinkhorn against exact enumeration, plus the OT throughput timing."""
import argparse
from collections import defaultdict
from pathlib import Path

import pandas as pd

from app.api.commands.common import parse_list, recorded_arguments
from app.services.manifest_service import write_manifest
from app.services.report_service import write_table
from app.services.transport import compare_with_oracle, measure_throughput

NAME = "oracle"
OUTPUT_ARGUMENTS = ("out",)
# timings are not part of the compared output
REPLAY_OVERRIDES = {"skip_throughput": True}
RESULT_FILE = "oracle.csv"
THROUGHPUT_BUDGET_SECONDS = 2.0


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        NAME, help="check Sinkhorn against the permutation oracle"
    )
    parser.add_argument("--instances", type=int, default=50)
    parser.add_argument("--max-n", type=int, default=6)
    parser.add_argument("--epsilons", default="1e-3,1e-4")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--skip-throughput", action="store_true")
    parser.add_argument("--out", default="runs/oracle")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    epsilons = parse_list(args.epsilons, float)
    comparisons = compare_with_oracle(args.instances, args.max_n, epsilons, args.seed)
    by_epsilon = defaultdict(list)
    rows = []
    for instance, comparison in enumerate(comparisons):
        by_epsilon[comparison.epsilon].append(comparison)
        rows.append({"instance": instance // len(epsilons), **comparison.model_dump(),
                     "gap": comparison.gap})
    table = write_table(pd.DataFrame(rows), Path(args.out) / RESULT_FILE)

    summary = {}
    for epsilon, group in by_epsilon.items():
        worst = max(c.gap for c in group)
        converged = sum(c.converged for c in group)
        summary[f"{epsilon:g}"] = {"max_gap": worst, "converged": converged}
        print(f"eps={epsilon:g}: max objective gap {worst:.3e} over {len(group)} "
              f"instances ({converged} converged)")

    if not args.skip_throughput:
        timing = measure_throughput(seed=args.seed)
        verdict = "within" if timing.seconds < THROUGHPUT_BUDGET_SECONDS else "over"
        print(f"{timing.C}x{timing.N} solve at eps={timing.epsilon:g}: "
              f"{timing.seconds:.3f}s "
              f"({verdict} the {THROUGHPUT_BUDGET_SECONDS:g}s target)")
        summary["throughput"] = timing.model_dump()

    write_manifest(args.out, NAME, parameters={
        "instances": args.instances, "max_n": args.max_n, "epsilons": epsilons,
        "seed": args.seed, "summary": summary,
    }, outputs={"comparisons": table}, arguments=recorded_arguments(args))
    return 0
