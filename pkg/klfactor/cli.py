#
#  cli.py
#
#  The `klfactor` command: one subcommand per computation, inputs and outputs
#  on files only.
#
#  Exit codes: 0 on success, 2 on invalid input, 3 on numerical failure.
#

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence

import numpy as np
import structlog

from . import __version__, algebras, correlations, distributions, files, galerkin, spectra
from .reports import AlgebraReport, GalerkinReport, MercerReport, PodReport, Report, SynthReport
from .utils import InputError, NumericalError, configure_logging

log = structlog.get_logger()

Subcommand = Literal["pod", "mercer", "algebra", "synth", "galerkin"]

SUBCOMMANDS: List[Subcommand] = ["pod", "mercer", "algebra", "synth", "galerkin"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

# which inputs each subcommand reads, and which of them are optional
INPUTS: Dict[str, Dict[str, bool]] = {
    "pod": {"snapshots": True, "weights": False},
    "mercer": {"snapshots": True, "weights": False},
    "algebra": {"algebra": True, "element": True, "other": False},
    "synth": {"model": True, "times": True},
    "galerkin": {"problem": True},
}

# sanity checks
assert set(INPUTS) == set(SUBCOMMANDS)


@dataclass
class RunConfig:
    subcommand: Subcommand
    inputs: Dict[str, str]
    out: str = "."
    seed: Optional[int] = None
    tolerances: Dict[str, float] = field(default_factory=dict)
    flags: Dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise InputError(f"unknown subcommand {self.subcommand!r}")

        for role, required in INPUTS[self.subcommand].items():
            path = self.inputs.get(role)
            if path is None:
                if required:
                    raise InputError(f"{self.subcommand} needs --{role}")
                continue
            if not Path(path).is_file():
                raise InputError(f"--{role}: no such file: {path}")

        if self.subcommand in ("pod", "mercer") and "weights" not in self.inputs and not self.flags.get("uniform_weights"):
            raise InputError(f"{self.subcommand} needs --weights or --uniform-weights")

        if self.seed is not None and not 0 <= self.seed < distributions.MAX_SEED:
            raise InputError(f"seed must lie in [0, 2**64), got {self.seed}")

    def echo(self) -> Dict[str, Any]:
        return asdict(self)

    def tolerance(self, name: str, default: float) -> float:
        """Look up a tolerance, recording the value in effect."""
        value = float(self.tolerances.get(name, default))
        self.tolerances[name] = value
        return value


def _out(config: RunConfig, name: str) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _weights(config: RunConfig) -> Optional[np.ndarray]:
    path = config.inputs.get("weights")
    return files.load_weights(path) if path else None


def _snapshots(config: RunConfig) -> correlations.SnapshotSet:
    return correlations.SnapshotSet.read_csv(
        config.inputs["snapshots"],
        weights=_weights(config),
        uniform=bool(config.flags.get("uniform_weights")),
        labels=bool(config.flags.get("labels")),
    )


#
#  subcommands
#


def run_pod(config: RunConfig) -> Report:
    rank_tol = config.tolerance("rank_tol", correlations.RANK_TOL)
    config.tolerance("zero_trace", correlations.ZERO_TRACE)
    dim_cap = int(config.flags.setdefault("dim_cap", correlations.DEFAULT_DIM_CAP))

    snap = _snapshots(config)
    C = correlations.build_correlation(snap, dim_cap=dim_cap)
    svd = correlations.eig_decompose(C, snap, rank_tol=rank_tol)

    if config.flags.get("rank") is not None:
        n = int(config.flags["rank"])
    elif config.flags.get("energy") is not None:
        n = correlations.select_rank(svd, float(config.flags["energy"]))
    else:
        n = svd.rank
    kl = correlations.kl_truncate(svd, n)

    files.write_matrix_csv(_out(config, "modes.csv"), kl.modes)
    files.write_matrix_csv(_out(config, "coeffs.csv"), kl.coeffs)
    files.write_frame_csv(_out(config, "energy.csv"), svd.energy_frame())

    log.info("pod.done", rank=n, discarded_energy=kl.discarded_energy)
    return PodReport(
        version=__version__,
        config=config.echo(),
        tolerances=dict(config.tolerances),
        dim=snap.dim,
        count=snap.count,
        trace=C.trace,
        retained=svd.rank,
        rank=n,
        lambda_=svd.eigenvalues.tolist(),
        discarded_energy=kl.discarded_energy,
        modes_csv="modes.csv",
        coeffs_csv="coeffs.csv",
        energy_csv="energy.csv",
    )


def run_mercer(config: RunConfig) -> Report:
    rank_tol = config.tolerance("rank_tol", correlations.RANK_TOL)

    snap = _snapshots(config)
    companion = correlations.companion_gram(snap, rank_tol=rank_tol)
    svd = correlations.eig_decompose(correlations.build_correlation(snap), snap, rank_tol=rank_tol)

    k = min(companion.coeffs.shape[1], svd.rank)
    gap = float(np.max(np.abs(companion.eigenvalues[:k] - svd.eigenvalues[:k]))) if k else 0.0

    files.write_matrix_csv(_out(config, "gram.csv"), companion.gram, labels=list(snap.labels))
    files.write_matrix_csv(_out(config, "mercer_coeffs.csv"), companion.coeffs)

    log.info("mercer.done", count=snap.count, retained=companion.coeffs.shape[1], gap=gap)
    return MercerReport(
        version=__version__,
        config=config.echo(),
        tolerances=dict(config.tolerances),
        count=snap.count,
        gram_csv="gram.csv",
        coeffs_csv="mercer_coeffs.csv",
        eigenvalues=companion.eigenvalues.tolist(),
        correlation_eigenvalues=svd.eigenvalues[: svd.rank].tolist(),
        max_eigenvalue_gap=gap,
    )


def _complex(z: complex) -> List[float]:
    return [z.real, z.imag]


def run_algebra(config: RunConfig) -> Report:
    tol = config.tolerance("tol", algebras.DEFAULT_TOL)
    config.tolerance("cluster_tol", spectra.CLUSTER_TOL)
    config.tolerance("reorth_tol", spectra.REORTH_TOL)

    doc = files.load_document(config.inputs["algebra"], "algebra")
    auto = config.flags.get("auto_normalise") or None
    alg = algebras.make_algebra(doc, auto_normalise=auto, tol=tol)
    a = algebras.load_element(alg, config.inputs["element"])

    flags = algebras.classify(alg, a, tol)
    report = AlgebraReport(
        version=__version__,
        config=config.echo(),
        tolerances=dict(config.tolerances),
        algebra=algebras.describe(alg),
        expectation=_complex(algebras.expectation(alg, a)),
        self_adjoint=flags.self_adjoint,
        positive=flags.positive,
        projection=flags.projection,
        variance=algebras.variance(alg, a),
        norms={p: spectra.lp_norm(alg, a, p, tol) for p in ("1", "2", "inf")},
    )

    if flags.self_adjoint:
        report.spectrum = spectra.spectrum(alg, a, tol=tol).tolist()
        report.law = spectra.law(alg, a, tol).to_dict()

    if config.flags.get("fn"):
        f = spectra.FnSpec.from_dict(config.flags["fn"])
        fa = spectra.apply_fn(alg, a, f, tol)
        files.write_matrix_csv(_out(config, "fn.csv"), fa.data.reshape(-1, alg.shape[-1]))
        report.fn = f.to_dict()
        report.fn_csv = "fn.csv"

    if config.inputs.get("other"):
        b = algebras.load_element(alg, config.inputs["other"])
        degree = int(config.flags.setdefault("degree", 2))
        pair: Dict[str, Any] = {
            "inner2": _complex(algebras.inner2(alg, a, b)),
            "covariance": _complex(algebras.covariance(alg, a, b)),
            "degree": degree,
            "independent": algebras.independence_test(alg, a, b, degree, tol),
        }
        if flags.self_adjoint and algebras.classify(alg, b, tol).self_adjoint:
            pair["uncertainty_gap"] = algebras.uncertainty_gap(alg, a, b, tol)
        report.pair = pair

    # lookups above may have added tolerances
    report.tolerances = dict(config.tolerances)
    return report


def run_synth(config: RunConfig) -> Report:
    config.tolerance("lag_tol", distributions.LAG_TOL)
    threshold = config.tolerance("z_threshold", distributions.Z_THRESHOLD)

    doc = files.load_document(config.inputs["model"], "stationary")
    if config.seed is not None:
        doc = {**doc, "seed": config.seed}
    model = distributions.StationaryModel.from_dict(doc)

    times = files.load_vector_csv(config.inputs["times"])
    n_paths = int(config.flags["paths"])
    paths = distributions.synth_stationary(model, times, n_paths)
    files.write_matrix_csv(_out(config, "paths.csv"), paths)

    rows: List[distributions.AutocovRow] = []
    lags = config.flags.get("lags") or []
    if lags:
        rows = distributions.autocov_check(paths, model, times, lags, threshold=threshold)

    return SynthReport(
        version=__version__,
        config=config.echo(),
        tolerances=dict(config.tolerances),
        paths_csv="paths.csv",
        n_paths=n_paths,
        n_times=len(times),
        seed=model.seed,
        variance_target=model.variance,
        autocovariance=rows,
        flagged=sum(r.flagged for r in rows),
    )


def run_galerkin(config: RunConfig) -> Report:
    config.tolerance("dependence_tol", galerkin.DEPENDENCE_TOL)
    config.tolerance("tol", algebras.DEFAULT_TOL)

    doc = files.load_document(config.inputs["problem"], "galerkin")
    if config.flags.get("keep") is not None:
        doc = {**doc, "keep": config.flags["keep"]}
    problem = galerkin.GalerkinProblem.from_dict(doc)

    sys_ = galerkin.assemble(problem.alg, problem.kappa, problem.forcing, problem.u0, keep=problem.keep)
    traj = galerkin.solve(sys_, problem.T, problem.steps)
    errors = galerkin.reference_compare(problem.alg, problem.kappa, problem.forcing, problem.u0, traj, problem.keep)

    files.write_frame_csv(_out(config, "trajectory.csv"), traj.to_frame())

    return GalerkinReport(
        version=__version__,
        config=config.echo(),
        tolerances=dict(config.tolerances),
        basis_size=errors.basis_size,
        kept=errors.kept,
        T=problem.T,
        steps=problem.steps,
        K=sys_.K.tolist(),
        errors=errors,
        trajectory_csv="trajectory.csv",
    )


RUNNERS: Dict[str, Callable[[RunConfig], Report]] = {
    "pod": run_pod,
    "mercer": run_mercer,
    "algebra": run_algebra,
    "synth": run_synth,
    "galerkin": run_galerkin,
}


def dispatch(config: RunConfig) -> int:
    """Run one subcommand and write its report; returns the exit code."""
    try:
        config.validate()
        log.info("run.start", subcommand=config.subcommand, out=config.out)
        report = RUNNERS[config.subcommand](config)
        report.save(_out(config, f"{config.subcommand}.json"))

    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as e:
        log.error("run.failed", subcommand=config.subcommand, error=type(e).__name__, message=str(e))
        return EXIT_NUMERICAL

    except (InputError, ValueError, KeyError, TypeError, OSError) as e:
        log.error("run.failed", subcommand=config.subcommand, error=type(e).__name__, message=str(e))
        return EXIT_INPUT

    log.info("run.done", subcommand=config.subcommand)
    return EXIT_OK


#
#  argument parsing
#


def _float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _fn_spec(text: str) -> Dict[str, Any]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise argparse.ArgumentTypeError(f"--fn expects JSON such as '{{\"fn\": \"sqrt\"}}': {e}")
    if not isinstance(doc, dict):
        raise argparse.ArgumentTypeError("--fn expects a JSON object")
    return doc


def _add_weights(p: argparse.ArgumentParser) -> None:
    p.add_argument("--snapshots", required=True, help="CSV with one snapshot per column")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--weights", help='JSON document {"weights": [...]}')
    group.add_argument("--uniform-weights", action="store_true", help="weight every snapshot 1/m")
    p.add_argument("--labels", action="store_true", help="first CSV row holds parameter labels")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="klfactor", description="Correlation factorisations and finite probability algebras.")
    parser.add_argument("--version", action="version", version=f"klfactor {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("pod", help="Karhunen-Loeve / POD decomposition of snapshots")
    _add_weights(p)
    rank = p.add_mutually_exclusive_group()
    rank.add_argument("--rank", type=int, help="number of modes to keep")
    rank.add_argument("--energy", type=float, help="keep the fewest modes leaving at most this relative residual energy")
    p.add_argument("--rank-tol", type=float, help="relative eigenvalue cut-off for retained modes")

    p = sub.add_parser("mercer", help="kernel (companion) operator on parameter space")
    _add_weights(p)
    p.add_argument("--rank-tol", type=float, help="relative eigenvalue cut-off for retained modes")

    p = sub.add_parser("algebra", help="state, spectrum and law of an element")
    p.add_argument("--algebra", required=True, help="JSON/YAML algebra document")
    p.add_argument("--element", required=True, help="CSV element")
    p.add_argument("--other", help="second CSV element for covariance and uncertainty")
    p.add_argument("--degree", type=int, default=2, help="monomial degree for the independence test")
    p.add_argument("--fn", type=_fn_spec, help='function to apply, e.g. \'{"fn": "sqrt"}\'')
    p.add_argument("--auto-normalise", action="store_true", help="rescale weights or density to unit mass")
    p.add_argument("--tol", type=float, help="classification and validation tolerance")

    p = sub.add_parser("synth", help="synthesise stationary paths from a spectral density")
    p.add_argument("--model", required=True, help="JSON/YAML stationary model")
    p.add_argument("--paths", type=int, required=True, help="number of sample paths")
    p.add_argument("--times", required=True, help="CSV of sample times")
    p.add_argument("--lags", type=_float_list, help="comma-separated lags to check the autocovariance at")
    p.add_argument("--seed", type=int, help="override the model's seed")

    p = sub.add_parser("galerkin", help="stochastic Galerkin solve of a random decay problem")
    p.add_argument("--problem", required=True, help="JSON/YAML problem document")
    p.add_argument("--keep", type=int, help="number of basis functions to keep")

    for p in sub.choices.values():
        p.add_argument("--out", default=".", help="output directory")

    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    ns = vars(args)
    subcommand = ns.pop("subcommand")
    inputs = {role: ns.pop(role) for role in INPUTS[subcommand] if ns.get(role) is not None}
    for role in INPUTS[subcommand]:
        ns.pop(role, None)

    tolerances = {}
    for name in ("rank_tol", "tol"):
        value = ns.pop(name, None)
        if value is not None:
            tolerances[name] = value

    out = ns.pop("out")
    seed = ns.pop("seed", None)
    flags = {k: v for k, v in ns.items() if v is not None}
    return RunConfig(subcommand=subcommand, inputs=inputs, out=out, seed=seed, tolerances=tolerances, flags=flags)


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    return dispatch(config_from_args(args))


if __name__ == "__main__":
    sys.exit(main())
