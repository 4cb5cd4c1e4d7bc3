"""End-to-end gate: every figure CSV emitted by the experiment harness
renders through the CLI with exit code 0, and a schema mismatch fails
with a nonzero exit."""

import pytest

from rka_mimo_plots import cli

rka_harness = pytest.importorskip(
    "rka_mimo.harness", reason="experiment package not installed")

TINY = {
    "system.m": "8",
    "system.k": "2",
    "system.tau_c": "8",
    "sweep.t_grid": "1,10,40",
    "sweep.alpha": "2,4",
    "sweep.estimators": "TRUE",
    "sweep.r": "0,0.5",
    "sweep.sigma": "0,4",
    "run.n_drops": "2",
    "run.n_real": "6",
}


@pytest.fixture(scope="module")
def harness_csvs(tmp_path_factory):
    root = tmp_path_factory.mktemp("csv")
    spec = rka_harness.ExperimentSpec.build(seed=23, overrides=TINY)
    paths = {}
    paths[1] = rka_harness.run_fig1(spec).write_csv(root / "fig1.csv")
    paths[2] = rka_harness.run_fig2(spec).write_csv(root / "fig2.csv")
    fig3, _ = rka_harness.run_fig3_table3(spec)
    paths[3] = fig3.write_csv(root / "fig3.csv")
    paths[4] = rka_harness.run_fig4(spec).write_csv(root / "fig4.csv")
    paths[5] = rka_harness.run_fig5(spec).write_csv(root / "fig5.csv")
    return paths


def test_all_five_figures_render(harness_csvs, tmp_path):
    for fig_id, csv in harness_csvs.items():
        out = tmp_path / f"fig{fig_id}.png"
        rc = cli.main(["render", "--fig", str(fig_id),
                       "--in", str(csv), "--out", str(out)])
        assert rc == 0, f"figure {fig_id} failed to render"
        assert out.stat().st_size > 1000
    print("PASS all five harness figure tables render with exit code 0")


def test_schema_mismatch_fails_nonzero(harness_csvs, tmp_path):
    rc = cli.main(["render", "--fig", "1",
                   "--in", str(harness_csvs[2]),
                   "--out", str(tmp_path / "bad.png")])
    assert rc != 0
    assert not (tmp_path / "bad.png").exists()
    print("PASS mismatched table is rejected with a nonzero exit")
