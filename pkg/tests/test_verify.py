from __future__ import annotations

from pathlib import Path

import pandas as pd
import pytest

from hjhomog.errors import ParameterError
from hjhomog.verify import SUITES, CheckResult, VerifyResult, comparison_violation, suite_configs, verify


def test_comparison_suite_passes_and_catches_its_negative_control(tmp_path: Path) -> None:
    result = verify("comparison", output=tmp_path)
    assert [check.name for check in result.checks] == [
        "order-preserved",
        "order-preserved-isotropic",
        "order-preserved-projection",
        "negative-control-detected",
    ]
    assert result.passed
    assert result.exit_code == 0
    report = pd.read_csv(tmp_path / "report.csv")
    assert report["passed"].tolist() == [True, True, True, True]
    assert (tmp_path / "manifest.txt").read_text(encoding="utf-8").startswith("report.csv\t")


def test_halved_dissipation_yields_a_located_witness() -> None:
    resolved = suite_configs("comparison")["comparison"]
    witness = comparison_violation(resolved, scale=0.5)
    assert witness is not None
    assert witness["difference"] < 0.0
    assert 0 <= witness["index"][0] < resolved.config.grid().points_per_axis


@pytest.mark.parametrize("name", ["isotropic", "projection"])
def test_diffusive_schemes_keep_order_for_one_step(name: str) -> None:
    resolved = suite_configs("comparison")[name]
    assert resolved.config.diffusion.nu == 0.05
    assert comparison_violation(resolved) is None


def test_every_suite_resolves_its_configs() -> None:
    for suite in SUITES:
        configs = suite_configs(suite)
        assert configs
        for resolved in configs.values():
            assert resolved.config.output.directory == f"runs/verify/{suite}"


def test_suite_overrides_reach_every_config() -> None:
    configs = suite_configs("oracle-1d", ["sweep.seeds=[0, 1]"])
    assert [resolved.config.sweep.seeds for resolved in configs.values()] == [[0, 1], [0, 1]]
    assert configs["eikonal"].sources["sweep.seeds"] == "override"


def test_unknown_suite() -> None:
    with pytest.raises(ParameterError, match="unknown suite"):
        suite_configs("oracle-3d")


def test_first_failure_and_exit_code() -> None:
    result = VerifyResult(suite="comparison", output_dir=Path("."))
    assert not result.passed
    result.checks = [CheckResult("a", True, ""), CheckResult("b", False, "x"), CheckResult("c", False, "y")]
    assert result.first_failure.name == "b"
    assert result.exit_code == 1
