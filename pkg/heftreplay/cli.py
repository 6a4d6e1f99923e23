"""
Command line interface for heftreplay.
"""

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .config import DEFAULT_CONFIG, RunConfig
from .core import HeftReplay
from .exceptions import HeftReplayError

logger = logging.getLogger(__name__)

COMMANDS = ("score", "trade", "leaderboard", "strategy-backtest", "combine", "validate-data")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heftreplay", description="HEFTcom forecasting and trading replay")
    parser.add_argument("command", choices=COMMANDS, help="What to run")
    parser.add_argument("--config", type=str, help="Run configuration (.yaml, .yml or .json)")
    parser.add_argument("--data-dir", type=str, help="Directory holding the archive files")
    parser.add_argument("--out-dir", type=str, help="Output directory")
    parser.add_argument("--window", type=str, help="Market days START:END, e.g. 2024-02-20:2024-05-19")
    parser.add_argument("--k", type=float, help="Price-maker coefficient (GBP/MWh per MWh)")
    parser.add_argument("--seed", type=int, help="Seed for the wind + solar copula aggregation (combine)")
    parser.add_argument("--rho", type=float, help="Wind-solar correlation for the combine aggregation, in [-1, 1]")
    parser.add_argument("--teams", type=str, help="Comma-separated team filter")
    parser.add_argument("--sanitize-probprofit", action="store_true",
                        help="Exclude ProbProfit's implausible forecast periods from its pinball score")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Defaults < config file < command-line flags"""
    config = RunConfig.load(args.config) if args.config else DEFAULT_CONFIG
    return config.with_overrides(
        data_dir=args.data_dir,
        out_dir=args.out_dir,
        window=args.window,
        k=args.k,
        seed=args.seed,
        rho=args.rho,
        teams=args.teams,
        sanitize_probprofit=args.sanitize_probprofit,
    )


async def cmd_score(config: RunConfig) -> List[Path]:
    return await HeftReplay(config).score()


async def cmd_trade(config: RunConfig) -> List[Path]:
    return await HeftReplay(config).trade()


async def cmd_leaderboard(config: RunConfig) -> List[Path]:
    return await HeftReplay(config).leaderboard()


async def cmd_strategy_backtest(config: RunConfig) -> List[Path]:
    return await HeftReplay(config).strategy_backtest()


async def cmd_combine(config: RunConfig) -> List[Path]:
    return await HeftReplay(config).combine()


async def cmd_validate_data(config: RunConfig) -> List[Path]:
    return await HeftReplay(config).validate_data()


HANDLERS = {
    "score": cmd_score,
    "trade": cmd_trade,
    "leaderboard": cmd_leaderboard,
    "strategy-backtest": cmd_strategy_backtest,
    "combine": cmd_combine,
    "validate-data": cmd_validate_data,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    try:
        config = load_config(args)
        if args.command != "validate-data":
            config.validate()
        paths = asyncio.run(HANDLERS[args.command](config))
    except HeftReplayError as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
    except (OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 2
    for path in paths:
        logger.info(f"Wrote {path}")
    return 0


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
