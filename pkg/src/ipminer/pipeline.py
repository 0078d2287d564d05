"""End-to-end runner: load, kinematics, graph, events, SIPM, EvIPM, exports."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .config import PipelineConfig
from .events import EventInstance, extract_events, write_event_histogram, write_events
from .evipm import EvipmResult, evipm
from .export import (GridSpec, write_density_grids, write_evolving_catalog, write_pattern_graphs,
                     write_static_catalog)
from .graph import LabelledNeighborGraph, build_neighbor_graph
from .scenarios import generate_scenario
from .sipm import SipmResult, sipm
from .trajectory import TrajectoryDataset, derive_kinematics, load_trajectories

logger = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")


@dataclass
class RunResult:
    dataset: TrajectoryDataset | None = None
    graph: LabelledNeighborGraph | None = None
    events: list[EventInstance] | None = None
    static: SipmResult | None = None
    evolving: EvipmResult | None = None
    timings: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)


class _Stage:
    def __init__(self, name: str, result: RunResult):
        self.name, self.result = name, result

    def __enter__(self):
        self.t0 = time.perf_counter()
        logger.info("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        self.result.timings[self.name] = round(time.perf_counter() - self.t0, 6)
        if exc is not None and not isinstance(exc, PipelineError):
            raise PipelineError(self.name, exc) from exc
        return False


def load_dataset(config: PipelineConfig) -> TrajectoryDataset:
    if config.input is not None:
        return load_trajectories(config.input, config.format_descriptor())
    return generate_scenario(config.scenario)


def run(config: PipelineConfig, write: bool = True, density: bool = True) -> RunResult:
    """Run the enabled stages and, if ``write``, store artifacts under ``config.output``."""
    res = RunResult()
    out = Path(config.output)
    with _Stage("load", res):
        res.dataset = load_dataset(config)
    with _Stage("kinematics", res):
        res.dataset = derive_kinematics(res.dataset)
    with _Stage("graph", res):
        res.graph = build_neighbor_graph(res.dataset, config.params, config.workers)
    scope = len(res.dataset.scope)
    with _Stage("events", res):
        res.events = extract_events(res.graph, config.params,
                                    literal_opposite_flanking=config.literal_opposite_flanking,
                                    workers=config.workers)
    if "sipm" in config.stages:
        with _Stage("sipm", res):
            res.static = sipm(res.events, config.thresholds, scope, config.max_agents)
    if "evipm" in config.stages:
        with _Stage("evipm", res):
            res.evolving = evipm(res.static, config.evipm, scope)
    if write:
        with _Stage("write", res):
            _write(config, res, out, density)
    return res


def _write(config: PipelineConfig, res: RunResult, out: Path, density: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    res.counts["events"] = write_events(res.events, out / "events.csv")
    res.counts["event_histogram"] = write_event_histogram(res.events, out / "event_histogram.csv")
    res.artifacts["events"] = "events.csv"
    res.artifacts["event_histogram"] = "event_histogram.csv"
    if res.static is not None:
        res.counts["static_patterns"] = write_static_catalog(res.static, out / "static_patterns.json")
        res.counts["pattern_graphs"] = len(write_pattern_graphs(res.static, out / "patterns"))
        res.artifacts["static_patterns"] = "static_patterns.json"
        res.artifacts["pattern_graphs"] = "patterns"
    if res.evolving is not None:
        res.counts["evolving_patterns"] = write_evolving_catalog(
            res.evolving, res.static, out / "evolving_patterns.json")
        res.artifacts["evolving_patterns"] = "evolving_patterns.json"
        if density:
            paths = write_density_grids(res.evolving, res.dataset, GridSpec(config.grid_cell),
                                        out / "density")
            res.counts["density_grids"] = len(paths)
            res.artifacts["density_grids"] = "density"
    manifest = {
        "version": __version__,
        "config_hash": config.digest(),
        "stages": ["load", "kinematics", "graph", *config.stages],
        "agents": len(res.dataset),
        "scope_length": len(res.dataset.scope),
        "interaction_edges": res.graph.int_edge_count,
        "counts": res.counts,
        "artifacts": res.artifacts,
        "timings": res.timings,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
