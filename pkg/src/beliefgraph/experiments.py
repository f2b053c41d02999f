"""Scenario configuration, run orchestration, and plot-ready data export.

A scenario builds the hidden graph and likelihood model from one root
seed, runs the engine and learner with an optional schedule of
true-state changes, edge regeneration, and periodic edge churn, and
writes every artifact needed to replay or plot the run: config echo,
graph and model files, traces, and influence reports. Derived seeds are
fixed offsets of the root (graph: seed, model: seed+1, observations:
seed+2, event at step s: seed+1000+s) so identical configs give byte
identical outputs.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import graphs, influence, likelihoods, ogl

FLOAT_FMT = "%.17g"


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the bad field."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one scenario; defaults match the reference setup
    of 30 agents, 10 hypotheses, binary observations, and 0.1 rates."""

    n: int = 30
    theta_count: int = 10
    z_count: int = 2
    edge_prob: float = 0.2
    delta: float = 0.1
    mu: float = 0.1
    steps: int = 14000
    seed: int = 7
    mode: str = "known"
    # Likelihood clip: 0.40 keeps the log-ratio scale in the regime where
    # the 0.1 learning rate is stable (see ogl.steady_state_bound); the
    # model generator itself defaults to a stronger 0.05 clip.
    epsilon: float = 0.40
    d: int = 2
    tau_edge: float = 0.05
    true_theta: int = 0
    save_beliefs: bool = False
    influence_target: int = 0
    top_paths: int = 5
    schedule: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "schedule", tuple(dict(ev) for ev in self.schedule))
        self._validate()

    def _validate(self):
        checks = [
            ("n", self.n >= 2, "need at least 2 agents"),
            ("theta_count", self.theta_count >= 2, "need at least 2 hypotheses"),
            ("z_count", self.z_count >= 2, "need at least 2 symbols"),
            ("edge_prob", 0.0 < self.edge_prob < 1.0, "must lie in (0, 1)"),
            ("delta", 0.0 < self.delta < 1.0, "must lie in (0, 1)"),
            ("mu", self.mu >= 0.0, "must be nonnegative"),
            ("steps", self.steps >= 0, "must be nonnegative"),
            ("mode", self.mode in ogl.MODES, f"must be one of {ogl.MODES}"),
            (
                "epsilon",
                0.0 < self.epsilon < 1.0 / self.z_count,
                "must lie in (0, 1/z_count)",
            ),
            ("d", self.d >= 0, "must be nonnegative"),
            ("tau_edge", self.tau_edge >= 0.0, "must be nonnegative"),
            (
                "true_theta",
                0 <= self.true_theta < self.theta_count,
                "must index a hypothesis",
            ),
            (
                "influence_target",
                0 <= self.influence_target < self.n,
                "must index an agent",
            ),
            ("top_paths", self.top_paths >= 0, "must be nonnegative"),
        ]
        for name, ok, why in checks:
            if not ok:
                raise ConfigError(f"{name}: {why}")
        last = 0
        for ev in self.schedule:
            step = ev.get("step")
            kind = ev.get("kind")
            if not isinstance(step, int) or step <= last:
                raise ConfigError("schedule: event steps must be strictly increasing")
            last = step
            if kind == "state-change":
                new = ev.get("new_theta")
                if not isinstance(new, int) or not 0 <= new < self.theta_count:
                    raise ConfigError("schedule: state-change needs a valid new_theta")
            elif kind == "regenerate-edges":
                p = ev.get("p", self.edge_prob)
                if not 0.0 < p < 1.0:
                    raise ConfigError("schedule: regenerate-edges p must lie in (0, 1)")
            elif kind == "churn":
                fp = ev.get("flip_prob")
                if not isinstance(fp, (int, float)) or not 0.0 <= fp < 1.0:
                    raise ConfigError("schedule: churn needs flip_prob in [0, 1)")
                if ev.get("period", 500) < 1:
                    raise ConfigError("schedule: churn period must be positive")
            else:
                raise ConfigError(f"schedule: unknown event kind {kind!r}")

    def events(self):
        """Schedule as learner event objects."""
        out = []
        for ev in self.schedule:
            if ev["kind"] == "state-change":
                out.append(ogl.StateChange(ev["step"], ev["new_theta"]))
            elif ev["kind"] == "regenerate-edges":
                out.append(ogl.RegenerateEdges(ev["step"], ev.get("p", self.edge_prob)))
            else:
                out.append(
                    ogl.EdgeChurn(ev["step"], ev["flip_prob"], ev.get("period", 500))
                )
        return tuple(out)

    def resolved(self) -> dict:
        """Every field with defaults filled in, for the config echo."""
        doc = asdict(self)
        doc["schedule"] = [dict(ev) for ev in self.schedule]
        doc["derived_seeds"] = {
            "graph": self.seed,
            "model": self.seed + 1,
            "observations": self.seed + 2,
        }
        return doc

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        doc = json.loads(Path(path).read_text())
        doc.pop("derived_seeds", None)
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class RunArtifacts:
    """Paths of everything a scenario emitted."""

    out_dir: Path
    config_echo: Path
    graph_true: Path
    model: Path
    msd_trace: Path | None = None
    graph_learned: Path | None = None
    belief_trace: Path | None = None
    influence_report: Path | None = None

    def all_paths(self):
        paths = [self.config_echo, self.graph_true, self.model]
        for p in (self.msd_trace, self.graph_learned, self.belief_trace, self.influence_report):
            if p is not None:
                paths.append(p)
        return paths


def write_msd_trace(path, trace: ogl.MsdTrace) -> None:
    events = dict(trace.events)
    with open(path, "w") as fh:
        fh.write("step,msd,mode,theta_hat,event\n")
        for i in range(trace.steps.size):
            step = int(trace.steps[i])
            fh.write(
                "%d,%s,%s,%d,%s\n"
                % (
                    step,
                    FLOAT_FMT % trace.msd[i],
                    trace.mode,
                    int(trace.theta_hat[i]),
                    events.get(step, ""),
                )
            )


def read_msd_trace(path):
    steps, msds, thetas = [], [], []
    with open(path) as fh:
        next(fh)
        for line in fh:
            parts = line.rstrip("\n").split(",")
            steps.append(int(parts[0]))
            msds.append(float(parts[1]))
            thetas.append(int(parts[3]))
    return np.asarray(steps), np.asarray(msds), np.asarray(thetas)


def write_belief_trace(path, beliefs: ogl.BeliefTrace) -> None:
    steps, n, theta_count = (
        beliefs.steps,
        beliefs.psi.shape[1] if beliefs.psi.ndim == 3 else 0,
        beliefs.psi.shape[2] if beliefs.psi.ndim == 3 else 0,
    )
    with_mu = beliefs.mu is not None
    cols = ["step"]
    cols += [f"psi_{k}_{t}" for k in range(n) for t in range(theta_count)]
    if with_mu:
        cols += [f"mu_{k}_{t}" for k in range(n) for t in range(theta_count)]
    cols.append("theta_hat")
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(steps.size):
            row = [str(int(steps[i]))]
            row += [FLOAT_FMT % v for v in beliefs.psi[i].ravel()]
            if with_mu:
                row += [FLOAT_FMT % v for v in beliefs.mu[i].ravel()]
            row.append(str(int(beliefs.theta_hat[i])))
            fh.write(",".join(row) + "\n")


def write_influence_report(
    path, matrix, target: int, d: int, delta: float, theta_count: int, top_m: int
) -> None:
    """Influence map for a target plus its strongest source paths."""
    imap = influence.influence_map(matrix, target, d, delta, theta_count)
    ranked = []
    for source in imap.sources:
        try:
            best = influence.most_influential_path(
                matrix, int(source), target, d, delta, theta_count
            )
        except influence.NoPathError:
            continue
        ranked.append(best)
    ranked.sort(key=lambda p: (-p.score, p.length, p.nodes))
    doc = {
        "target": target,
        "d": d,
        "delta": delta,
        "normalization_degenerate": imap.degenerate,
        "sources": [
            {
                "agent": int(imap.sources[i]),
                "raw": float(imap.raw[i]),
                "normalized": float(imap.normalized[i]),
            }
            for i in range(imap.sources.size)
        ],
        "top_paths": [
            {"nodes": list(map(int, p.nodes)), "score": p.score}
            for p in ranked[:top_m]
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def _build(config: ExperimentConfig):
    graph = graphs.generate_erdos_renyi(config.n, config.edge_prob, config.seed)
    model = likelihoods.generate_model(
        config.n,
        config.theta_count,
        config.z_count,
        epsilon=config.epsilon,
        seed=config.seed + 1,
        true_theta=config.true_theta,
    )
    return graph, model


def _write_common(config: ExperimentConfig, graph, model, out: Path):
    echo = out / "config_echo.json"
    echo.write_text(json.dumps(config.resolved(), indent=1) + "\n")
    graph_path = out / "graph_true.json"
    graphs.save_graph(graph_path, graph, seed=config.seed)
    model_path = out / "model.json"
    likelihoods.save_model(model_path, model, config.true_theta, seed=config.seed + 1)
    return echo, graph_path, model_path


def run_scenario(config: ExperimentConfig, out_dir) -> RunArtifacts:
    """Full learning run: build, simulate + learn, write all artifacts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graph, model = _build(config)
    result = ogl.run_online(
        graph,
        model,
        config.true_theta,
        config.steps,
        config.delta,
        config.mu,
        mode=config.mode,
        seed=config.seed + 2,
        schedule=config.events(),
        record_beliefs=config.save_beliefs,
    )
    echo, graph_path, model_path = _write_common(config, graph, model, out)
    learned_path = out / "graph_learned.json"
    graphs.save_graph(learned_path, result.learner.estimate, seed=config.seed, learned=True)
    msd_path = out / "msd_trace.csv"
    write_msd_trace(msd_path, result.trace)
    belief_path = None
    if config.save_beliefs:
        belief_path = out / "belief_trace.csv"
        write_belief_trace(belief_path, result.beliefs)
    report_path = out / "influence_report.json"
    write_influence_report(
        report_path,
        ogl.postprocess_learned(result.learner.estimate, config.tau_edge),
        config.influence_target,
        config.d,
        config.delta,
        config.theta_count,
        config.top_paths,
    )
    return RunArtifacts(
        out_dir=out,
        config_echo=echo,
        graph_true=graph_path,
        model=model_path,
        msd_trace=msd_path,
        graph_learned=learned_path,
        belief_trace=belief_path,
        influence_report=report_path,
    )


def run_simulation(config: ExperimentConfig, out_dir) -> RunArtifacts:
    """Engine-only run: belief trace without the learner."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graph, model = _build(config)
    result = ogl.run_online(
        graph,
        model,
        config.true_theta,
        config.steps,
        config.delta,
        config.mu,
        mode=config.mode,
        seed=config.seed + 2,
        schedule=config.events(),
        learn=False,
        record_beliefs=True,
    )
    echo, graph_path, model_path = _write_common(config, graph, model, out)
    belief_path = out / "belief_trace.csv"
    write_belief_trace(belief_path, result.beliefs)
    return RunArtifacts(
        out_dir=out,
        config_echo=echo,
        graph_true=graph_path,
        model=model_path,
        belief_trace=belief_path,
    )


class ComparisonResult(NamedTuple):
    known: ogl.MsdTrace
    vote: ogl.MsdTrace
    path: Path


def compare_modes(config: ExperimentConfig, out_dir) -> ComparisonResult:
    """Run both learner variants on the identical observation stream."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graph, model = _build(config)
    traces = {}
    for mode in ogl.MODES:
        traces[mode] = ogl.run_online(
            graph,
            model,
            config.true_theta,
            config.steps,
            config.delta,
            config.mu,
            mode=mode,
            seed=config.seed + 2,
            schedule=config.events(),
        ).trace
    path = out / "msd_compare.csv"
    with open(path, "w") as fh:
        fh.write("step,msd_known,msd_vote\n")
        for i in range(config.steps):
            fh.write(
                "%d,%s,%s\n"
                % (
                    i + 1,
                    FLOAT_FMT % traces["known"].msd[i],
                    FLOAT_FMT % traces["vote"].msd[i],
                )
            )
    return ComparisonResult(known=traces["known"], vote=traces["vote"], path=path)


def emit_plot_data(artifacts: RunArtifacts, which: str) -> Path:
    """Reduce stored traces to minimal plot-ready files."""
    out = artifacts.out_dir
    if which == "msd":
        if artifacts.msd_trace is None:
            raise ValueError("no learner trace in these artifacts")
        steps, msds, _ = read_msd_trace(artifacts.msd_trace)
        path = out / "msd_plot.csv"
        with open(path, "w") as fh:
            fh.write("step,msd\n")
            for s, m in zip(steps, msds):
                fh.write("%d,%s\n" % (s, FLOAT_FMT % m))
        return path
    if which == "map":
        doc = json.loads(Path(artifacts.influence_report).read_text())
        path = out / "map_plot.csv"
        with open(path, "w") as fh:
            fh.write("source,raw,normalized\n")
            for row in doc["sources"]:
                fh.write(
                    "%d,%s,%s\n"
                    % (row["agent"], FLOAT_FMT % row["raw"], FLOAT_FMT % row["normalized"])
                )
        return path
    if which == "path":
        doc = json.loads(Path(artifacts.influence_report).read_text())
        path = out / "path_plot.json"
        path.write_text(json.dumps({"paths": doc["top_paths"]}) + "\n")
        return path
    raise ValueError(f"unknown plot selector {which!r}")
