import dataclasses
import logging
import os

from fastmcp import FastMCP

from rebalance_lab import ConfigManager, LabError, RebalancingLab
from rebalance_lab.config import SyntheticSpec, override
from rebalance_lab.data import generate_synthetic
from rebalance_lab.sim import station_events, tradeoff_table

logging.basicConfig(level=logging.INFO)

mcp = FastMCP("rebalance-lab")

CONFIG_PATH = os.environ.get("REBALANCE_CONFIG", "config.json")


def _lab(corpus_dir: str = "") -> RebalancingLab:
    settings = ConfigManager(CONFIG_PATH).get_settings()
    return RebalancingLab(settings=settings, corpus_dir=corpus_dir or None)


@mcp.tool
def generate_corpus(out_dir: str, station_count: int = 50, fleet_size: int = 500, seed: int = 7) -> str:
    """
    Generate a synthetic bike-sharing corpus.

    Args:
        out_dir: Directory that receives stations.csv, rides.csv and snapshot.json
        station_count: Number of stations (at least 3)
        fleet_size: Number of bikes in the system
        seed: Seed of the generator

    Returns:
        The written file paths, or an error message
    """
    try:
        spec = override(SyntheticSpec(), station_count=station_count, fleet_size=fleet_size, seed=seed)
        corpus = generate_synthetic(spec)
        paths = corpus.save(out_dir)
        return f"Generated {len(corpus.stations)} stations and {len(corpus.rides)} rides:\n" + \
            "\n".join(f"- {kind}: {path}" for kind, path in paths.items())
    except LabError as e:
        return f"Error generating corpus: {e}"


@mcp.tool
def simulate(trucks: int = 0, alpha: str = "inf", seed: int = 1, day_type: str = "weekday",
             corpus_dir: str = "") -> str:
    """
    Run one closed-loop simulation (one burn-in day plus the measured days).

    Args:
        trucks: Number of repositioning trucks
        alpha: Payout weight of the price controller; "inf" disables payouts
        seed: Master seed of the run
        day_type: "weekday" or "weekend"
        corpus_dir: Corpus directory; the configured synthetic corpus when empty

    Returns:
        Service level and event counts of the measured days
    """
    try:
        lab = _lab(corpus_dir)
        sim = override(lab.settings.sim, trucks=trucks, alpha=alpha, seed=seed, day_type=day_type)
        sim.validate()
        report = lab.simulate(sim)
        row = report.to_row(sim)
        return "\n".join(f"{key}: {value}" for key, value in row.items())
    except LabError as e:
        return f"Error running simulation: {e}"


@mcp.tool
def sweep(trucks: str = "0,1,2,3", alphas: str = "inf,0.1", seeds: int = 5, out_path: str = "results/sweep.csv",
          corpus_dir: str = "") -> str:
    """
    Run a sweep over truck counts and payout weights.

    Args:
        trucks: Comma-separated truck counts
        alphas: Comma-separated payout weights ("inf" disables payouts)
        seeds: Number of seeds per grid cell, starting at 1
        out_path: CSV file that receives one row per run
        corpus_dir: Corpus directory; the configured synthetic corpus when empty

    Returns:
        The aggregated trade-off table as CSV text
    """
    try:
        lab = _lab(corpus_dir)
        grid = override(lab.settings.sweep, trucks=trucks.split(","), alphas=alphas.split(","),
                        seeds=list(range(1, seeds + 1)))
        lab.settings = dataclasses.replace(lab.settings, sweep=grid).validate()
        _, summary = lab.sweep(out_path)
        return summary.to_csv(index=False, float_format="%.6f")
    except LabError as e:
        return f"Error running sweep: {e}"


@mcp.tool
def station_plateau(station_id: int, minute: int, day_type: str = "weekday", corpus_dir: str = "") -> str:
    """
    Plateau of maximal repositioning utility for one station.

    Args:
        station_id: Station id from the station table
        minute: Minute of the day the look-ahead starts at
        day_type: "weekday" or "weekend"
        corpus_dir: Corpus directory; the configured synthetic corpus when empty

    Returns:
        Lower and upper fill bounds of the plateau
    """
    try:
        plateau = _lab(corpus_dir).station_plateau(station_id, minute, day_type)
        flag = " (degenerate)" if plateau.degenerate else ""
        return f"Station {station_id} at minute {minute}: [{plateau.lower:.3f}, {plateau.upper:.3f}]{flag}"
    except LabError as e:
        return f"Error computing plateau: {e}"


@mcp.tool
def service_level_report(run_csv: str, event_log: str = "") -> str:
    """
    Aggregate a run table into the service-level trade-off table.

    Args:
        run_csv: Run table written by simulate or sweep
        event_log: Optional event log; adds the stations with the most no-service events

    Returns:
        The trade-off table (and station ranking) as CSV text
    """
    try:
        text = tradeoff_table([run_csv]).to_csv(index=False, float_format="%.6f")
        if event_log:
            text += "\n" + station_events(event_log).head(10).to_csv(index=False, float_format="%.6f")
        return text
    except LabError as e:
        return f"Error building report: {e}"


if __name__ == "__main__":
    mcp.run()
