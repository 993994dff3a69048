import argparse
import json
import logging
from pathlib import Path
from typing import Callable

import numpy as np
from pydantic import ValidationError

from src.config import CONFIG
from src.control import ControlMode, is_controllable
from src.ensembles import (AtomDistribution, AtomKind, EnsembleSpec, matrix_to_csv,
                           matrix_to_integer_lists, read_matrix_csv, sample_matrix)
from src.errors import ConfigurationError, DomainError, LabError
from src.experiments.config import load_experiment_config, parse_flat_config
from src.experiments.emit import PlotKind, emit_plot_data, load_records, write_text
from src.experiments.runner import run_campaign
from src.graph import digraph_report
from src.spectral import charpoly_exact, eigen_decompose, min_gap, simple_spectrum_exact
from src.structure import structure_report
from src.view import CLIView

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

# Parameters filled in when only the family of an atom is named
_ATOM_DEFAULTS = {
    AtomKind.GAUSSIAN: {"sigma": 1.0},
    AtomKind.UNIFORM_PM: {"half_width": 3 ** 0.5},
    AtomKind.CENTERED_BERNOULLI: {"p": "1/2"},
}


def _atom(kind: str | None) -> AtomDistribution | None:
    if kind is None:
        return None
    kind = AtomKind(kind)
    return AtomDistribution(kind=kind, **_ATOM_DEFAULTS.get(kind, {}))


def _read_vector(path: Path) -> np.ndarray:
    """A vector from JSON (numbers or [re, im] pairs) or from CSV."""
    if path.suffix == ".json":
        try:
            data = np.asarray(json.loads(path.read_text()), dtype=float)
        except (OSError, ValueError) as e:
            raise DomainError(f"cannot read vector from {path}: {e}") from e
        if data.ndim == 2 and data.shape[1] == 2:
            return data[:, 0] + 1j * data[:, 1]
        return data.ravel()
    return read_matrix_csv(path).ravel()


def _ensemble(flat: dict) -> EnsembleSpec:
    try:
        return EnsembleSpec.from_flat(flat)
    except ValidationError as e:
        raise ConfigurationError(f"invalid ensemble:\n{e}") from e


def _read_matrix(path: str) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DomainError(f"{path}: no such file")
    return read_matrix_csv(path)


class LabManager:
    """
    Command-line front end: parses a subcommand, runs it and prints the
    result through the view.
    """

    def __init__(self, config):
        """
        Initialize the lab with configuration and its console view.

        Args:
            config: Lab configuration (see src/config.py)
        """
        self.config = config
        self.view = CLIView(level=config.logging.level, log_file=config.logging.file)
        self.commands: dict[str, Callable[[argparse.Namespace], int]] = {
            "gen": self.gen,
            "spectrum": self.spectrum,
            "structure": self.structure,
            "control": self.control,
            "graph": self.graph,
            "campaign": self.campaign,
            "plot": self.plot,
        }

    # Subcommands

    def gen(self, args: argparse.Namespace) -> int:
        """Sample one matrix and print it as CSV or exact integer lists."""
        if args.spec:
            path = Path(args.spec)
            data = parse_flat_config(path.read_text())
            flat = _flatten(data.get("ensemble", data))
        elif args.p is not None:
            flat = {"n": args.n, "graph.p": args.p, "graph.loops": args.loops}
        else:
            flat = {"n": args.n, "atom.kind": args.atom}
            for key, value in _ATOM_DEFAULTS.get(AtomKind(args.atom), {}).items():
                flat[f"atom.{key}"] = value
        for assignment in args.set or []:
            key, _, value = assignment.partition("=")
            flat[key.strip()] = value.strip()
        spec = _ensemble(flat)

        M = sample_matrix(spec, args.seed)
        logger.info("Sampled %dx%d matrix from seed %d", spec.n, spec.n, args.seed)
        if args.integer:
            text = json.dumps(matrix_to_integer_lists(M)) + "\n"
        else:
            text = matrix_to_csv(M)
        if args.out:
            write_text(Path(args.out), text)
            self.view.display_message(f"Matrix written to {args.out}")
        else:
            self.view.display_text(text)
        return EXIT_OK

    def spectrum(self, args: argparse.Namespace) -> int:
        A = _read_matrix(args.matrix)
        spectrum = eigen_decompose(A, tol=args.tol)
        result = {"spectrum": spectrum.to_dict()}
        if spectrum.n > 1:
            result["gap"] = min_gap(spectrum).to_dict()
        if args.exact:
            result["charpoly"] = charpoly_exact(A).to_dict()
            result["simple_spectrum"] = simple_spectrum_exact(A)
        if args.scatter:
            emit_plot_data(spectrum, args.scatter, kind=PlotKind.SCATTER)
        self.view.display_json(result)
        return EXIT_OK

    def structure(self, args: argparse.Namespace) -> int:
        v = _read_vector(Path(args.vector))
        norm = np.linalg.norm(v)
        if norm == 0:
            raise DomainError("the zero vector has no structure report")
        if abs(norm - 1) > 1e-10:
            logger.info("Normalizing input vector (norm %.6g)", norm)
            v = v / norm
        report = structure_report(v, atom=_atom(args.atom), a=args.a, b=args.b, B=args.B,
                                  t_values=tuple(args.t or ()), samples=args.samples,
                                  seed=args.seed)
        self.view.display_json(report.model_dump_json(indent=2))
        return EXIT_OK

    def control(self, args: argparse.Namespace) -> int:
        A = _read_matrix(args.A)
        b = _read_matrix(args.b).ravel()
        report = is_controllable(A, b, ControlMode(args.mode), rank_tol=args.tol,
                                 pbh_tol=args.pbh_tol)
        payload = report.model_dump(mode="json")
        payload["controllable"] = report.controllable
        for warning in report.warnings:
            logger.warning(warning)
        self.view.display_json(payload)
        return EXIT_OK

    def graph(self, args: argparse.Namespace) -> int:
        spec = _ensemble({"n": args.n, "graph.p": args.p, "graph.loops": args.loops})
        adj = sample_matrix(spec, args.seed)
        spectrum = eigen_decompose(adj)
        report = digraph_report(adj, args.p, args.delta, spectrum)
        scatter = Path(args.scatter or Path(self.config.experiments.output_dir)
                       / f"digraph_n{args.n}_seed{args.seed}_scatter.csv")
        emit_plot_data(spectrum, scatter, kind=PlotKind.SCATTER)
        self.view.display_json(report.model_dump_json(indent=2))
        self.view.display_message(f"Eigenvalue scatter written to {scatter}")
        return EXIT_OK

    def campaign(self, args: argparse.Namespace) -> int:
        """Run a campaign; the exit code follows its acceptance threshold."""
        config = load_experiment_config(args.config)
        self.view.start_progress(f"Running {config.name}")
        try:
            _, summary = run_campaign(config, workers=args.workers, out_dir=args.out,
                                      write=not args.dry_run)
        finally:
            self.view.stop_progress()
        self.view.display_summary(summary)
        return EXIT_FAILED if summary.acceptance is False else EXIT_OK

    def plot(self, args: argparse.Namespace) -> int:
        """Plot-ready CSV: eigenvalue scatter of a matrix or gap CDF of a record file."""
        if args.matrix:
            text = emit_plot_data(eigen_decompose(_read_matrix(args.matrix)), args.out,
                                  kind=PlotKind.SCATTER)
        else:
            records = load_records(args.records)
            values = [r.measured[args.quantity] for r in records
                      if r.error is None and r.measured.get(args.quantity) is not None]
            if not values:
                raise DomainError(f"no trial in {args.records} measured {args.quantity}")
            text = emit_plot_data(values, args.out, kind=args.kind)
        if args.out:
            self.view.display_message(f"Plot data written to {args.out}")
        else:
            self.view.display_text(text)
        return EXIT_OK

    def run(self, argv: list[str] | None = None) -> int:
        """Parse ``argv`` and execute the subcommand, mapping errors to exit codes."""
        args = build_parser().parse_args(argv)
        logger.info("Running command %s", args.command)
        try:
            return self.commands[args.command](args)
        except ConfigurationError as e:
            self.view.display_error(f"Configuration error: {e}")
            return EXIT_CONFIG
        except LabError as e:
            logger.debug("Command %s failed", args.command, exc_info=True)
            self.view.display_error(f"{e.tag}: {e}")
            return EXIT_FAILED
        except OSError as e:
            self.view.display_error(str(e))
            return EXIT_FAILED


def _flatten(node: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in node.items():
        name = f"{prefix}.{key}" if prefix else key
        if isinstance(value, dict):
            flat.update(_flatten(value, name))
        else:
            flat[name] = value
    return flat


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmt", description="Random matrix controllability lab")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="sample a matrix")
    gen.add_argument("--n", type=int, default=10)
    gen.add_argument("--atom", choices=[k.value for k in AtomKind if k is not AtomKind.DISCRETE],
                     default=AtomKind.RADEMACHER.value)
    gen.add_argument("--p", type=str, default=None, help="edge probability; samples a digraph")
    gen.add_argument("--loops", action="store_true")
    gen.add_argument("--spec", help="flat or [ensemble] block file")
    gen.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override an ensemble key, e.g. diagonal=zero")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--integer", action="store_true", help="print exact integer lists")
    gen.add_argument("--out")

    spectrum = sub.add_parser("spectrum", help="eigen-decomposition of a CSV matrix")
    spectrum.add_argument("matrix")
    spectrum.add_argument("--tol", type=float, default=None)
    spectrum.add_argument("--exact", action="store_true",
                          help="exact characteristic polynomial and simplicity")
    spectrum.add_argument("--scatter", help="write the eigenvalue scatter CSV here")

    structure = sub.add_parser("structure", help="structure report of a vector")
    structure.add_argument("vector", help="CSV or JSON file")
    structure.add_argument("--atom", choices=[k.value for k in AtomKind if k is not AtomKind.DISCRETE])
    structure.add_argument("--a", type=float, default=0.25)
    structure.add_argument("--b", type=float, default=0.3)
    structure.add_argument("--B", type=float, default=None)
    structure.add_argument("--t", type=float, action="append")
    structure.add_argument("--samples", type=int, default=None)
    structure.add_argument("--seed", type=int, default=0)

    control = sub.add_parser("control", help="controllability of (A, b)")
    control.add_argument("A")
    control.add_argument("b")
    control.add_argument("--mode", choices=[m.value for m in ControlMode],
                         default=ControlMode.ALL.value)
    control.add_argument("--tol", type=float, default=None, help="numeric rank tolerance")
    control.add_argument("--pbh-tol", type=float, default=None)

    graph = sub.add_parser("graph", help="sample and analyse a directed Erdős–Rényi graph")
    graph.add_argument("--n", type=int, required=True)
    graph.add_argument("--p", type=float, default=0.5)
    graph.add_argument("--loops", action="store_true")
    graph.add_argument("--seed", type=int, default=0)
    graph.add_argument("--delta", type=float, default=0.2)
    graph.add_argument("--scatter")

    campaign = sub.add_parser("campaign", help="run an experiment campaign")
    campaign.add_argument("--config", required=True)
    campaign.add_argument("--workers", type=int, default=None)
    campaign.add_argument("--out", default=None)
    campaign.add_argument("--dry-run", action="store_true", help="do not write outputs")

    plot = sub.add_parser("plot", help="plot-ready CSV")
    source = plot.add_mutually_exclusive_group(required=True)
    source.add_argument("--matrix")
    source.add_argument("--records")
    plot.add_argument("--quantity", default="normalized_delta")
    plot.add_argument("--kind", choices=[k.value for k in PlotKind], default=PlotKind.GAP_CDF.value,
                      help="gap_cdf for a gap sample, scatter for recorded eigenvalues")
    plot.add_argument("--out")
    return parser


def main(argv: list[str] | None = None) -> int:
    """Application entry point"""
    manager = LabManager(config=CONFIG)
    return manager.run(argv)


if __name__ == "__main__":
    raise SystemExit(main())
