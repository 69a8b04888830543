"""Desk-scale runs of the built-in suites. Deselected by default; run with -m acceptance."""

from __future__ import annotations

from pathlib import Path

import pytest

from hjhomog.config import load_config
from hjhomog.environment import EnvironmentSpec
from hjhomog.grid import GridSpec
from hjhomog.homog import corrector_report, vanishing_discount
from hjhomog.models import DiffusionSpec, HamiltonianSpec
from hjhomog.pipelines import run_config
from hjhomog.solver import SchemeParams
from hjhomog.verify import verify

pytestmark = pytest.mark.acceptance

REPO_ROOT = Path(__file__).resolve().parents[1]
CONFIGS = REPO_ROOT / "data" / "configs"


@pytest.mark.parametrize("suite", ["oracle-1d", "assumption-H", "convex-variance", "comparison", "radial-2d"])
def test_suite_passes(suite: str, tmp_path: Path) -> None:
    result = verify(suite, workers=4, output=tmp_path)
    assert result.passed, result.first_failure


def test_oracle_suite_is_reproducible(tmp_path: Path) -> None:
    first = verify("oracle-1d", workers=4, output=tmp_path / "a")
    second = verify("oracle-1d", workers=1, output=tmp_path / "b")
    assert (first.output_dir / "manifest.txt").read_bytes() == (second.output_dir / "manifest.txt").read_bytes()


def test_sublinearity_ratio_decays_as_the_box_grows() -> None:
    environment = EnvironmentSpec(
        family="RandomPhaseTrig",
        params={"level": 2.0, "amplitudes": [1.0], "frequencies": [1.0]},
    )
    H_spec = HamiltonianSpec(family="Eikonal", environment=environment)
    A_spec = DiffusionSpec()
    params = SchemeParams()
    ratios = []
    for extent in (4.0, 8.0, 16.0):
        grid = GridSpec(dim=1, extent=extent, spacing=1.0 / 256)
        estimate = vanishing_discount(
            H_spec, A_spec, [1.0], [0.2, 0.1, 0.05, 0.025], [0], grid, params, keep_final=True
        )
        report = corrector_report(
            H_spec.build(grid, 0), A_spec.build(grid, 0), [1.0], estimate.final_solutions[0], estimate.cbar, grid, params
        )
        ratios.append(report.sublinearity_profile[-1][1])
    assert ratios[1] <= 0.6 * ratios[0]
    assert ratios[2] <= 0.6 * ratios[1]


def test_oscillatory_gap_shrinks_with_epsilon(tmp_path: Path) -> None:
    record = run_config(load_config(CONFIGS / "oscillatory-eikonal-1d.json"), workers=4, output=tmp_path)
    assert record.passed, record.metrics["sup_gaps"]


def test_corrector_mean_zero_on_the_isotropized_ensemble(tmp_path: Path) -> None:
    record = run_config(load_config(CONFIGS / "corrector-eikonal-2d.json"), workers=4, output=tmp_path)
    assert record.metrics["mean_zero_status"] == "pass"
