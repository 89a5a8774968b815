#
#  test_reports.py
#

import random
from dataclasses import dataclass
from typing import Any, Dict, Optional

from dataclasses_json import dataclass_json

from klfactor import reports
from klfactor.distributions import AutocovRow
from klfactor.galerkin import ErrorReport

from .mocking import mock


def test_pruned_json():
    @reports.pruned_json
    @dataclass_json
    @dataclass
    class Row:
        name: Optional[str] = None
        values: Optional[list] = None

        def to_dict(self) -> Dict[str, Any]:
            ...

    assert Row(name="x").to_dict() == {"name": "x"}
    assert Row(name="x", values=[]).to_dict() == {"name": "x"}
    assert Row(values=[1]).to_dict() == {"values": [1]}


def _pod_report(**kwargs) -> reports.PodReport:
    fields = dict(
        version="0.1.0",
        config={"subcommand": "pod"},
        tolerances={"rank_tol": 1e-12},
        dim=2,
        count=2,
        trace=2.0,
        retained=2,
        rank=1,
        lambda_=[1.5, 0.5],
        discarded_energy=0.5,
        modes_csv="modes.csv",
        coeffs_csv="coeffs.csv",
    )
    fields.update(kwargs)
    return reports.PodReport(**fields)  # type: ignore


def test_pod_report_keys():
    d = _pod_report().to_dict()
    assert list(d)[0] == "version"
    assert d["lambda"] == [1.5, 0.5]
    assert "lambda_" not in d
    assert "energy_csv" not in d


def test_pod_report_round_trip(tmp_path):
    report = _pod_report(energy_csv="energy.csv")
    path = tmp_path / "pod.json"
    report.save(path)
    assert reports.PodReport.load(path) == report


def test_synth_report_round_trip(tmp_path):
    gen = random.Random(1)
    rows = [mock(AutocovRow, gen) for _ in range(3)]
    report = reports.SynthReport(
        version="0.1.0",
        config={},
        tolerances={"z_threshold": 4.0},
        paths_csv="paths.csv",
        n_paths=100,
        n_times=5,
        seed=7,
        variance_target=2.0,
        autocovariance=rows,
        flagged=sum(r.flagged for r in rows),
    )
    path = tmp_path / "synth.json"
    report.save(path)
    assert reports.SynthReport.load(path) == report


def test_galerkin_report_round_trip(tmp_path):
    errors = mock(ErrorReport)
    report = reports.GalerkinReport(
        version="0.1.0",
        config={"subcommand": "galerkin"},
        tolerances={},
        basis_size=2,
        kept=2,
        T=1.0,
        steps=10,
        K=[[1.5, -0.5], [-0.5, 1.5]],
        errors=errors,
        trajectory_csv="trajectory.csv",
    )
    path = tmp_path / "galerkin.json"
    report.save(path)

    loaded = reports.GalerkinReport.load(path)
    assert loaded.errors == errors
    assert loaded.K == report.K


def test_algebra_report_omits_missing_sections():
    report = reports.AlgebraReport(
        version="0.1.0",
        config={},
        tolerances={"tol": 1e-9},
        algebra={"model": "function", "shape": [2]},
        expectation=[2.0, 0.0],
        self_adjoint=True,
        positive=True,
        projection=False,
        variance=1.0,
        norms={"2": 1.0},
    )
    d = report.to_dict()
    assert "pair" not in d
    assert "spectrum" not in d
    assert d["self_adjoint"] is True
