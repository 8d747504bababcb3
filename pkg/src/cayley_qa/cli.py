"""Command-line runner: ``cayley-qa <subcommand> [--config F | --preset K] ...``.

Every subcommand writes its artifacts plus ``metadata.json`` into the output
directory.  Artifacts contain no timings or host details, so identical
configs and seeds give byte-identical files whatever ``--threads`` is.
Failures print a JSON error record to stderr (and ``error.json``) and exit 2.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, preset
from .dynamics import (
    LINDBLAD_MAX_N,
    TRAJECTORY_MAX_N,
    StepControl,
    evolve_lindblad,
    evolve_schrodinger,
    evolve_trajectories,
)
from .errors import CayleyQAError, ConfigError, TooLarge
from .groundstate import ENUMERATION_MAX_N, phase_diagram, write_phase_csv
from .hamiltonian import HamiltonianSpec
from .holography import (
    SlmPlane,
    TargetSet,
    random_targets,
    wgs_optimize,
    write_intensity_csv,
    write_phase_raw,
)
from .lattice import validate_geometry, write_geometry
from .measurement import (
    apply_spam,
    histogram,
    sample_distribution,
    sample_neel_order,
    write_histogram_csv,
)

SCHRODINGER_MAX_N = 24
SUBCOMMANDS = ("geometry", "phase-diagram", "anneal", "sample", "neel", "holo")


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


class Run:
    def __init__(self, cfg: ExperimentConfig, out: Path, threads: int, preset_key: int | None):
        self.cfg = cfg
        self.out = out
        self.threads = threads
        self.preset_key = preset_key
        self.meta: dict = {}

    # --- shared pieces ----------------------------------------------------

    def setup(self):
        graph, geo = self.cfg.build_graph()
        self.graph, self.geo = graph, geo
        self.consts = self.cfg.physical_constants()
        self.meta.update(
            graph=graph.name,
            n_atoms=graph.n_vertices,
            d_um=geo.d,
            d_over_rb=geo.d / self.consts.blockade_radius(),
            mode=self.cfg.mode_enum().value,
        )
        return graph, geo

    def solver(self) -> str:
        n = self.graph.n_vertices
        noise = self.cfg.noise_model()
        choice = self.cfg.dynamics.solver
        if choice == "auto":
            if noise.is_noiseless:
                choice = "schrodinger"
            elif n <= TRAJECTORY_MAX_N:
                choice = "trajectories"
            else:
                choice = "schrodinger"
                self.meta.setdefault("warnings", []).append(
                    f"noise ignored: N={n} exceeds the trajectory budget N <= {TRAJECTORY_MAX_N}"
                )
        limits = {"schrodinger": SCHRODINGER_MAX_N, "trajectories": TRAJECTORY_MAX_N, "lindblad": LINDBLAD_MAX_N}
        if choice not in limits:
            raise ConfigError(f"unknown solver {choice!r}")
        if n > limits[choice]:
            raise TooLarge(f"{choice} limited to N <= {limits[choice]}, config has N={n}")
        self.meta["solver"] = choice
        return choice

    def evolve(self, sample_times=None, keep_state: bool = False):
        cfg = self.cfg
        sched = cfg.build_schedule()
        spec = HamiltonianSpec.from_geometry(self.graph, self.geo, sched, self.consts, cfg.mode_enum())
        solver = self.solver()
        if cfg.dynamics.samples < 1 or cfg.dynamics.dt_us <= 0:
            raise ConfigError("dynamics.samples must be >= 1 and dynamics.dt_us > 0")
        if sample_times is None:
            sample_times = np.linspace(0.0, sched.t_f, cfg.dynamics.samples)
        step = StepControl(dt_max=cfg.dynamics.dt_us)
        noise = cfg.noise_model()
        if solver == "schrodinger":
            res = evolve_schrodinger(spec, sched, step=step, sample_times=sample_times, graph=self.graph)
            probs = np.abs(res.final_state) ** 2
        elif solver == "trajectories":
            res = evolve_trajectories(
                spec, sched, noise=noise, n_traj=cfg.dynamics.n_traj, seed=cfg.seed,
                sample_times=sample_times, step=step, graph=self.graph,
                threads=self.threads, chunk=cfg.dynamics.chunk,
            )
            probs = res.extras["final_probabilities"]
            self.meta["n_traj"] = cfg.dynamics.n_traj
        else:
            res = evolve_lindblad(spec, sched, noise=noise, sample_times=sample_times, graph=self.graph)
            probs = np.real(np.diag(res.final_state)).copy()
        self.meta["noise_per_us"] = [noise.gamma_individual, noise.gamma_collective] if solver != "schrodinger" else [0.0, 0.0]
        return res, probs / probs.sum()

    # --- subcommands --------------------------------------------------------

    def geometry(self):
        graph, geo = self.setup()
        write_geometry(graph, geo, self.out / "geometry.txt")
        report = validate_geometry(graph, geo)
        _dump_json({"ok": report.ok, **report.as_dict()}, self.out / "validation.json")
        self.meta["validation_ok"] = report.ok

    def phase_diagram(self):
        graph, geo = self.setup()
        if graph.n_vertices > ENUMERATION_MAX_N:
            raise TooLarge(f"phase diagram enumeration limited to N <= {ENUMERATION_MAX_N}")
        pd = self.cfg.phase_diagram
        if pd.points is not None:
            grid = [(float(u), float(dl)) for u, dl in pd.points]
        else:
            try:
                us = np.linspace(pd.u_range[0], pd.u_range[1], int(pd.u_range[2]))
                ds = np.linspace(pd.delta_range[0], pd.delta_range[1], int(pd.delta_range[2]))
            except (IndexError, TypeError, ValueError) as exc:
                raise ConfigError("u_range / delta_range must be [start, stop, count]") from exc
            grid = [(float(u), float(dl)) for u in us for dl in ds]
        pts = phase_diagram(graph, grid, self.cfg.mode_enum(), geo, self.consts)
        write_phase_csv(pts, self.out / "phase_diagram.csv")

    def anneal(self):
        self.setup()
        res, _ = self.evolve()
        res.to_jsonl(self.out / "anneal.jsonl")

    def sample(self):
        graph, _ = self.setup()
        if self.cfg.shots < 1:
            raise ConfigError("shots must be >= 1")
        _, probs = self.evolve(sample_times=[self.cfg.build_schedule().t_f])
        record = sample_distribution(probs, self.cfg.shots, seed=self.cfg.seed)
        spam = self.cfg.spam_model()
        if spam is not None:
            record = apply_spam(record, spam, seed=self.cfg.seed + 1)
        write_histogram_csv(histogram(record), self.out / "histogram.csv")
        self.meta.update(
            shots=record.n_shots,
            spam_applied=record.spam_applied,
            argmax=record.argmax(),
            top=[list(kv) for kv in record.top(5)],
            sampled_neel=sample_neel_order(record, graph.edges),
        )

    def neel(self):
        graph, _ = self.setup()
        res, _ = self.evolve()
        spam = self.cfg.spam_model()
        a, b = spam.affine() if spam is not None else (1.0, 0.0)
        s = 2 * res.occupations - 1
        edge_mean = np.array([np.mean([s[i, j] + s[i, k] for j, k in graph.edges]) for i in range(len(res.times))])
        post = a * a * res.neel - a * b * edge_mean - b * b
        se = res.neel_se if res.neel_se is not None else np.zeros(len(res.times))
        n = graph.n_vertices
        with open(self.out / "neel.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_us", "O_N", "O_N_se", "O_N_spam", "ground_overlap"] + [f"n_{j}" for j in range(n)])
            for i, t in enumerate(res.times):
                gp = res.ground_probability[i] if res.ground_probability is not None else float("nan")
                w.writerow([repr(float(t)), repr(float(res.neel[i])), repr(float(se[i])), repr(float(post[i])), repr(float(gp))]
                           + [repr(float(x)) for x in res.occupations[i]])

    def holo(self):
        h = self.cfg.holo
        try:
            plane = SlmPlane(h.nx, h.ny, h.pitch_um, h.focal_length_um, h.wavelength_um)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if h.sites_um is not None:
            targets = TargetSet(np.asarray(h.sites_um, dtype=float))
        else:
            if h.n_targets < 1:
                raise ConfigError("holo.n_targets must be >= 1")
            targets = random_targets(h.n_targets, self.cfg.seed, h.extent_um, h.depth_um, h.min_separation_um)
        if h.iterations < 1:
            raise ConfigError("holo.iterations must be >= 1")
        result = wgs_optimize(targets, plane, h.iterations, seed=self.cfg.seed)
        write_phase_raw(result.phase, self.out / "phase.raw")
        write_intensity_csv(result, targets, self.out / "intensities.csv")
        self.meta.update(n_targets=len(targets), uniformity=result.uniformity)
        print(f"w-GS: {h.iterations} iterations in {result.wall_time:.2f} s, uniformity {result.uniformity[-1]:.4f}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cayley-qa", description="Quantum annealing on Rydberg-atom Cayley trees.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", type=Path, help="YAML experiment config")
        src.add_argument("--preset", type=int, choices=range(1, 6), help="circled parameter set 1..5")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--out", type=Path, help="output directory (overrides config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        p.add_argument("--mode", choices=("ideal", "full"), help="interaction model")
    return parser


def _load(args) -> tuple[ExperimentConfig, int | None]:
    if args.config is not None:
        cfg = ExperimentConfig.load(args.config)
    elif args.preset is not None:
        cfg = preset(args.preset)
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        cfg.seed = args.seed
    if args.mode is not None:
        cfg.mode = args.mode
    if args.out is not None:
        cfg.out = str(args.out)
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return cfg, args.preset


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out) if args.out is not None else None
    try:
        cfg, key = _load(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        run = Run(cfg, out, args.threads, key)
        getattr(run, args.command.replace("-", "_"))()
        meta = {
            "command": args.command,
            "version": __version__,
            "preset": key,
            "seed": cfg.seed,
            "notes": cfg.notes,
            "config": {k: v for k, v in cfg.to_dict().items() if k != "out"},
            **run.meta,
        }
        _dump_json(meta, out / "metadata.json")
    except CayleyQAError as exc:
        record = {"error": exc.code, "message": str(exc), "command": args.command}
        if getattr(exc, "diagnostics", None):
            record["diagnostics"] = exc.diagnostics
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        if out is not None and out.is_dir():
            _dump_json(record, out / "error.json")
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
