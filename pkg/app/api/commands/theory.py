"""``theory``: the two-class prompt model; single runs, the CE/MAE suite, ratios."""
import argparse
from pathlib import Path

import pandas as pd

from app.api.commands.common import parse_list, recorded_arguments
from app.core.config import N_JOBS
from app.schemas.theory import TheoryConfig
from app.services.manifest_service import write_manifest
from app.services.report_service import write_table
from app.services.theory import ratio_table, run_theorem_suite, train_prompt

NAME = "theory"
# both names run the CE versus MAE seed suite
SUITES = ("theorem42", "ce-vs-mae")
OUTPUT_ARGUMENTS = ("out",)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        NAME, help="simulate prompt training on the two-class model"
    )
    mode = parser.add_mutually_exclusive_group()
    mode.add_argument("--suite", choices=SUITES, help="CE vs MAE over --seeds seeds")
    mode.add_argument("--ratios", action="store_true",
                      help="print expected update ratios")
    parser.add_argument("--seeds", type=int, default=20, help="number of suite seeds")
    parser.add_argument("--loss", choices=["ce", "mae"], default="ce")
    parser.add_argument("--n", type=int, default=200)
    parser.add_argument("--n-test", type=int, default=2000)
    parser.add_argument("--p-noise", type=float, default=0.3)
    parser.add_argument("--sigma-p", type=float, default=0.5)
    parser.add_argument("--m", type=int, default=50)
    parser.add_argument("--L", dest="L", type=int, default=20)
    parser.add_argument("--eta", type=float, default=0.01)
    parser.add_argument("--iters", type=int, default=1500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--flip-all", action="store_true")
    parser.add_argument("--literal-sigma-prime", action="store_true")
    parser.add_argument("--mean-s-y", default="0.6,0.7,0.8,0.9", help="ratio grid")
    parser.add_argument("--p-grid", default="0,0.05,0.1,0.2,0.3", help="ratio grid")
    parser.add_argument("--jobs", type=int, default=N_JOBS)
    parser.add_argument("--out", default="runs/theory")
    parser.set_defaults(handler=run)


def _run_ratios(args: argparse.Namespace, out: Path) -> tuple[dict, dict]:
    cells = ratio_table(parse_list(args.mean_s_y, float),
                        parse_list(args.p_grid, float))
    for cell in cells:
        print(f"E[s_y]={cell.mean_s_y:g} p={cell.p_noise:g}: beta ratio "
              f"{cell.beta_ratio:.6g}, phi ratio {cell.phi_ratio:.6g}, "
              f"chain {'holds' if cell.chain_holds else 'fails'}")
    frame = pd.DataFrame([cell.model_dump() for cell in cells])
    table = write_table(frame, out / "ratios.csv")
    return {"mean_s_y": args.mean_s_y, "p_grid": args.p_grid}, {"ratios": table}


def _run_suite(config: TheoryConfig, args: argparse.Namespace,
               out: Path) -> tuple[dict, dict]:
    summary = run_theorem_suite(config, range(args.seeds), n_jobs=args.jobs)
    frame = pd.DataFrame([outcome.model_dump() for outcome in summary.outcomes])
    table = write_table(frame, out / "suite.csv")
    print(f"MAE not worse than CE in {summary.mae_not_worse_fraction:.0%} of "
          f"{args.seeds} seeds (mean test error CE {summary.mean_ce_error:.4f}, "
          f"MAE {summary.mean_mae_error:.4f}); "
          f"MAE SNR higher in {summary.mae_snr_higher_fraction:.0%}")
    outcome = {"suite": args.suite, "seeds": args.seeds, "holds": summary.holds}
    return outcome, {"suite": table}


def _run_single(config: TheoryConfig, args: argparse.Namespace,
                out: Path) -> tuple[dict, dict]:
    trajectory = train_prompt(config, literal_sigma_prime=args.literal_sigma_prime)
    rows = []
    for record in trajectory.records:
        row = record.model_dump(exclude={"phi"})
        row["phi_abs_max"] = max((abs(v) for v in record.phi), default=0.0)
        rows.append(row)
    table = write_table(pd.DataFrame(rows), out / "trajectory.csv")
    final = trajectory.final
    print(f"{config.loss_kind} after {final.iteration} iterations: test error "
          f"{final.test_loss:.4f}, beta {final.beta:.6g}, SNR {trajectory.snr:.6g}")
    outcome = {"monotone_train_loss": trajectory.monotone_train_loss}
    return outcome, {"trajectory": table}


def run(args: argparse.Namespace) -> int:
    out = Path(args.out)
    config = TheoryConfig(loss_kind=args.loss, n=args.n, n_test=args.n_test,
                          p_noise=args.p_noise, sigma_p=args.sigma_p, m=args.m,
                          L=args.L, eta=args.eta, iters=args.iters, seed=args.seed,
                          flip_all=args.flip_all)
    if args.ratios:
        outcome, outputs = _run_ratios(args, out)
    elif args.suite:
        outcome, outputs = _run_suite(config, args, out)
    else:
        outcome, outputs = _run_single(config, args, out)
    write_manifest(out, NAME, parameters={"theory": config.model_dump(), **outcome},
                   outputs=outputs, arguments=recorded_arguments(args))
    return 0
