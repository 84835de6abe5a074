import numpy as np
import pytest

from irlslab.experiments import (
    DEFAULTS,
    ExperimentSpec,
    ExperimentReport,
    TrialResult,
    gamma_sweep,
    recovery_statistics,
    run_experiment,
    write_report,
)
from irlslab.instances import nu_critical, random_gaussian_instance
from irlslab.solver import DDFG, MODIFIED, IrlsConfig, run_irls_cs

from _l1 import basis_pursuit_lp


def _read_lines(path):
    return path.read_text().strip().splitlines()


class TestSpec:
    def test_unknown_id_and_scale(self):
        with pytest.raises(ValueError):
            ExperimentSpec(id="E9")
        with pytest.raises(ValueError):
            ExperimentSpec(id="E1", scale="galactic")

    def test_unknown_override_rejected(self):
        spec = ExperimentSpec(id="E4", overrides={"warp": 9})
        with pytest.raises(ValueError, match="warp"):
            spec.resolve()

    def test_overrides_and_seeds_applied(self):
        spec = ExperimentSpec(id="E4", seeds=(3, 4), overrides={"max_iter": 7})
        p = spec.resolve()
        assert p["max_iter"] == 7
        assert p["seeds"] == (3, 4)

    def test_defaults_tables_cover_both_scales(self):
        for scale in ("desk", "paper"):
            for exp in ("E1", "E2", "E3", "E4", "E5"):
                assert DEFAULTS[scale][exp]["success_tol"] == 1e-3


def test_gamma_sweep_contains_critical_constant():
    sweep = gamma_sweep(5)
    values = dict(sweep)
    assert values["critical"] == nu_critical(5)
    assert values["1-1e-1"] == pytest.approx(0.9)
    assert len(sweep) == 8


class TestRecoveryStatistics:
    def test_all_success_at_iteration_one_is_a_step(self):
        rows = [
            TrialResult(t, DDFG, {"sparsity": 5}, 10, 1, 1e-9, "StepTol", True)
            for t in range(4)
        ]
        report = ExperimentReport("E5", "desk", {}, ("sparsity",), rows)
        curve = recovery_statistics(report)[(5, DDFG)]
        assert curve.fraction[0] == 0.0
        assert np.all(curve.fraction[1:] == 1.0)

    def test_empty_report_rejected(self):
        report = ExperimentReport("E5", "desk", {}, ("sparsity",), [])
        with pytest.raises(ValueError):
            recovery_statistics(report)

    def test_desk_analog_reaches_full_recovery(self):
        spec = ExperimentSpec(
            id="E5", scale="desk", seeds=(0, 1, 2), overrides={"sparsities": (10,)}
        )
        report = run_experiment(spec)
        stats = recovery_statistics(report)
        for curve in stats.values():
            assert curve.fraction[-1] == 1.0
            assert curve.avg_err is not None
            # mean error decays by orders of magnitude over the run
            assert curve.avg_err[-1] <= 1e-5 * curve.avg_err[0]

    def test_recovered_solution_matches_lp_oracle(self):
        p = DEFAULTS["desk"]["E5"]
        inst = random_gaussian_instance(p["m"], p["N"], 10, p["value_std"], seed=0)
        cfg = IrlsConfig(
            variant=MODIFIED, K=50, gamma=0.9, eta=0.9,
            max_iter=p["max_iter"], step_tol=p["step_tol"],
        )
        res = run_irls_cs(inst, cfg)
        x_lp = basis_pursuit_lp(inst.phi, inst.y)
        assert np.linalg.norm(res.x - x_lp) <= 1e-4


class TestAggregates:
    def test_success_rate_recomputable_from_rows(self):
        spec = ExperimentSpec(
            id="E4",
            scale="desk",
            seeds=(0, 1, 2),
            overrides={"Ks": (9, 50), "gammas": (0.9,), "max_iter": 800},
        )
        report = run_experiment(spec)
        for agg in report.aggregate():
            rows = [
                r
                for r in report.rows
                if r.variant == agg["variant"]
                and all(r.cell[k] == agg[k] for k in report.cell_keys)
            ]
            assert agg["trials"] == len(rows)
            assert agg["successes"] == sum(r.success for r in rows)
            assert agg["success_rate"] == agg["successes"] / agg["trials"]

    def test_reduced_grid_separates_k(self):
        spec = ExperimentSpec(
            id="E4",
            scale="desk",
            seeds=(0, 1, 2),
            overrides={"Ks": (9, 50), "gammas": (0.9,), "max_iter": 800},
        )
        report = run_experiment(spec)
        rates = {
            (agg["K"], agg["variant"]): agg["success_rate"]
            for agg in report.aggregate()
        }
        for variant in (DDFG, MODIFIED):
            assert rates[(9, variant)] == 0.0
            assert rates[(50, variant)] == 1.0


@pytest.fixture(scope="module")
def reduced_e1():
    spec = ExperimentSpec(
        id="E1",
        scale="desk",
        overrides={"ddfg_iters": 300, "modified_iters": 300},
    )
    return run_experiment(spec)


class TestE1:

    def test_ddfg_trace_matches_oracle(self, reduced_e1):
        tr = reduced_e1.traces["ddfg"]
        orc = reduced_e1.oracle
        assert orc.s.shape[0] == tr.s.shape[0]
        rel = np.abs(tr.s[1:] - orc.s[1:]) / (1 + orc.s[1:])
        assert rel.max() <= 1e-9

    def test_eps_monotone_and_positive_for_ddfg(self, reduced_e1):
        eps = reduced_e1.traces["ddfg"].eps
        assert np.all(np.diff(eps) <= 0.0)
        assert eps[-1] > 0.0

    def test_written_files(self, reduced_e1, tmp_path):
        out = write_report(reduced_e1, tmp_path)
        for name in (
            "trials.csv",
            "aggregate.csv",
            "metadata.txt",
            "trace_ddfg.csv",
            "trace_modified.csv",
            "oracle.csv",
        ):
            assert (out / name).exists(), name
        header = _read_lines(out / "trace_ddfg.csv")[0]
        assert header == "n,eps,J,err1,err2,step_w,status,s"
        assert _read_lines(out / "oracle.csv")[0] == "n,s,eps,z1"
        meta = (out / "metadata.txt").read_text()
        assert "note1 =" in meta and "tool_version" in meta


class TestE2Claims:
    def test_gamma_sensitivity_endpoints(self):
        # gamma = 0.9 recovers quickly; the band at and just below the
        # critical constant exhausts its budget without reaching tolerance
        spec = ExperimentSpec(
            id="E2",
            scale="desk",
            seeds=(0,),
            overrides={
                "gammas": (0.9, 1 - 10**-3.6, nu_critical(5)),
                "max_iter": 20_000,
            },
        )
        report = run_experiment(spec)
        by_gamma = {round(r.cell["gamma"], 7): r for r in report.rows}
        assert by_gamma[0.9].success
        assert by_gamma[0.9].iterations_to_success < 1000
        assert not by_gamma[round(1 - 10**-3.6, 7)].success
        assert not by_gamma[round(nu_critical(5), 7)].success
        labels = {r.cell["gamma_label"] for r in report.rows}
        assert "critical" in labels


class TestPaperScaleSmoke:
    def test_single_cell_runs_at_full_size(self):
        spec = ExperimentSpec(
            id="E4",
            scale="paper",
            seeds=(0,),
            overrides={"Ks": (250,), "gammas": (0.9,), "max_iter": 60},
        )
        report = run_experiment(spec)
        assert len(report.rows) == 2
        assert all(r.success for r in report.rows)
        assert report.params["m"] == 300 and report.params["N"] == 500


class TestE3Smoke:
    def test_reduced_run_records_failures_without_raising(self):
        spec = ExperimentSpec(
            id="E3",
            scale="desk",
            seeds=(0, 1),
            overrides={"sigmas": (1e-1,), "max_iter": 3000},
        )
        report = run_experiment(spec)
        assert len(report.rows) == 2
        assert all(r.status in ("StepTol", "MaxIter", "EpsZero") for r in report.rows)
        # sigma=0.1 perturbations recover quickly at desk scale
        assert all(r.success for r in report.rows)


class TestDeterminism:
    def test_identical_spec_writes_identical_bytes(self, tmp_path):
        spec = ExperimentSpec(
            id="E2", scale="desk", seeds=(0, 1), overrides={"max_iter": 400}
        )
        d1 = write_report(run_experiment(spec), tmp_path / "a")
        d2 = write_report(run_experiment(spec), tmp_path / "b")
        names = sorted(p.name for p in d1.iterdir())
        assert names == sorted(p.name for p in d2.iterdir())
        for name in names:
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes(), name

    def test_different_seeds_differ(self, tmp_path):
        a = run_experiment(
            ExperimentSpec(id="E2", scale="desk", seeds=(0,), overrides={"max_iter": 200})
        )
        b = run_experiment(
            ExperimentSpec(id="E2", scale="desk", seeds=(1,), overrides={"max_iter": 200})
        )
        assert any(
            ra.iterations_run != rb.iterations_run or ra.final_err2 != rb.final_err2
            for ra, rb in zip(a.rows, b.rows)
        )


def test_e5_writes_recovery_curves(tmp_path):
    spec = ExperimentSpec(
        id="E5", scale="desk", seeds=(0, 1), overrides={"sparsities": (5,)}
    )
    out = write_report(run_experiment(spec), tmp_path)
    for variant in (DDFG, MODIFIED):
        path = out / f"recovery_sparsity5_{variant}.csv"
        assert path.exists()
        header = _read_lines(path)[0]
        assert header == "n,fraction_recovered,avg_err2"


def test_figures_render(tmp_path):
    from irlslab.plots import render_report

    for exp_id, overrides in (
        ("E1", {"ddfg_iters": 50, "modified_iters": 50}),
        ("E2", {"max_iter": 100}),
        ("E3", {"sigmas": (1e-1,), "max_iter": 200}),
        ("E4", {"Ks": (9, 50), "gammas": (0.9,), "max_iter": 300}),
        ("E5", {"sparsities": (5,)}),
    ):
        spec = ExperimentSpec(id=exp_id, scale="desk", seeds=(0, 1), overrides=overrides)
        report = run_experiment(spec)
        paths = render_report(report, tmp_path / exp_id)
        assert paths and all(p.exists() and p.stat().st_size > 0 for p in paths)
