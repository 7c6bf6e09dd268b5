"""End-to-end runs of the four subcommands against temp configs."""

import csv
import json
import math

import pytest

from ulamix.cli import main


def _write_config(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def _plan_doc(**plan):
    plan = {"eps": 0.1, "s": 10, "gamma": 1.0, "H0": 1.0, **plan}
    return {"potential": {"name": "gaussian", "dim": 2, "params": {}}, "plan": plan}


def _sample_doc(out, **run):
    run = {"n_chains": 4, "n_steps": 50, "eta": 0.05, "thin": 10, "seed": 3, **run}
    return {
        "potential": {"name": "gaussian", "dim": 1, "params": {}},
        "run": run,
        "output": {"dir": str(out), "checkpoints": [10, 30, 50]},
    }


def _read_meta(out_dir):
    lines = (out_dir / "run_meta.txt").read_text(encoding="utf-8").splitlines()
    return dict(line.split("=", 1) for line in lines)


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class TestPlan:
    def test_golden_document(self, tmp_path, capsys):
        cfgp = _write_config(tmp_path / "c.json", _plan_doc())
        assert main(["plan", "--config", cfgp, "--out", str(tmp_path / "o")]) == 0
        text = (tmp_path / "o" / "plan.txt").read_text(encoding="utf-8")
        assert text == capsys.readouterr().out
        assert "lambda=6\n" in text
        assert f"tilde_d={math.log(8 * math.pi):.17g}\n" in text
        assert (
            "K=192918330890136213049307313002447245973019661474331496219953594368\n"
            in text
        )
        assert "eta_term_1=1\n" in text
        assert "mu=none\n" in text

    def test_repeat_is_byte_identical(self, tmp_path):
        cfgp = _write_config(tmp_path / "c.json", _plan_doc())
        main(["plan", "--config", cfgp, "--out", str(tmp_path / "a")])
        main(["plan", "--config", cfgp, "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "plan.txt").read_bytes() == (
            tmp_path / "b" / "plan.txt"
        ).read_bytes()

    def test_ineligible_exits_2(self, tmp_path, capsys):
        doc = _plan_doc()
        doc["potential"] = {"name": "pseudo_huber", "dim": 2, "params": {}}
        cfgp = _write_config(tmp_path / "c.json", doc)
        assert main(["plan", "--config", cfgp, "--out", str(tmp_path / "o")]) == 2
        err = capsys.readouterr().err
        assert err.startswith("plan ineligible:")
        assert "2*alpha_N <= beta" in err

    def test_degenerate_plan_warns(self, tmp_path, capsys):
        cfgp = _write_config(tmp_path / "c.json", _plan_doc(eps=2.0, H0=1.0))
        assert main(["plan", "--config", cfgp, "--out", str(tmp_path / "o")]) == 0
        out = capsys.readouterr().out
        assert "# warning:" in out and "nothing to do (K=0)" in out
        assert "K=0\n" in (tmp_path / "o" / "plan.txt").read_text(encoding="utf-8")

    def test_default_h0_surrogate_can_degenerate(self, tmp_path, capsys):
        doc = _plan_doc()
        del doc["plan"]["H0"]  # falls back to the O(d) start surrogate
        del doc["plan"]["gamma"]  # falls back to the declared constant
        cfgp = _write_config(tmp_path / "c.json", doc)
        assert main(["plan", "--config", cfgp, "--out", str(tmp_path / "o")]) == 0
        assert "# warning:" in capsys.readouterr().out

    def test_gamma_from_spec_requires_declared_constant(self, tmp_path, capsys):
        doc = _plan_doc(gamma="from_spec")
        doc["potential"] = {"name": "power", "dim": 1, "params": {"alpha": 0.5}}
        cfgp = _write_config(tmp_path / "c.json", doc)
        assert main(["plan", "--config", cfgp, "--out", str(tmp_path / "o")]) == 1
        assert capsys.readouterr().err.startswith("config error:")

    def test_gamma_from_convexity_lower_bound(self, tmp_path):
        cfgp = _write_config(tmp_path / "c.json", _plan_doc(gamma="poincare_lb"))
        assert main(["plan", "--config", cfgp, "--out", str(tmp_path / "o")]) == 0
        assert "gamma=0.00390625\n" in (tmp_path / "o" / "plan.txt").read_text(
            encoding="utf-8"
        )


class TestConfigErrors:
    def test_missing_file(self, tmp_path, capsys):
        assert main(["plan", "--config", str(tmp_path / "nope.json")]) == 1
        assert "config file not found" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{not json", encoding="utf-8")
        assert main(["plan", "--config", str(p)]) == 1
        assert "not valid JSON" in capsys.readouterr().err

    def test_missing_potential_block(self, tmp_path, capsys):
        cfgp = _write_config(tmp_path / "c.json", {"plan": {"eps": 0.1, "s": 10}})
        assert main(["plan", "--config", cfgp]) == 1
        assert "potential block" in capsys.readouterr().err

    def test_planned_eta_needs_plan_block(self, tmp_path, capsys):
        doc = _sample_doc(tmp_path / "o")
        doc["run"]["eta"] = "plan"
        cfgp = _write_config(tmp_path / "c.json", doc)
        assert main(["sample", "--config", cfgp]) == 1
        assert "plan block is required" in capsys.readouterr().err


class TestCheck:
    def test_builtin_constants_pass(self, tmp_path, capsys):
        doc = {
            "potential": {"name": "gauss_plus_power", "dim": 2, "params": {"alpha": 0.5}},
            "check": {"n_points": 1500, "radius": 8.0, "seed": 0},
        }
        cfgp = _write_config(tmp_path / "c.json", doc)
        assert main(["check", "--config", cfgp, "--out", str(tmp_path / "o")]) == 0
        rows = _read_rows(tmp_path / "o" / "check.csv")
        assert [r["id"] for r in rows] == [
            "MixtureSmooth", "Dissipative", "LowerEnvelope", "OriginStationary",
        ]
        assert all(r["passed"] == "true" for r in rows)
        assert all(float(r["worst_ratio"]) <= 1.0 for r in rows)
        assert capsys.readouterr().out.count(": pass") == 4


class TestSample:
    def test_seed_repeat_is_byte_identical(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        cfgp = _write_config(tmp_path / "c.json", _sample_doc(out_a))
        assert main(["sample", "--config", cfgp]) == 0
        assert main(["sample", "--config", cfgp, "--out", str(out_b)]) == 0
        for name in ("samples.csv", "summary.csv", "run_meta.txt"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_seed_override_changes_samples(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        cfgp = _write_config(tmp_path / "c.json", _sample_doc(out_a))
        main(["sample", "--config", cfgp])
        main(["sample", "--config", cfgp, "--out", str(out_b), "--seed", "4"])
        assert (out_a / "samples.csv").read_bytes() != (out_b / "samples.csv").read_bytes()
        assert _read_meta(out_b)["seed"] == "4"

    def test_sample_file_layout(self, tmp_path):
        out = tmp_path / "o"
        cfgp = _write_config(tmp_path / "c.json", _sample_doc(out))
        main(["sample", "--config", cfgp])
        rows = _read_rows(out / "samples.csv")
        assert set(rows[0].keys()) == {"chain_id", "k", "x_1"}
        ks = {int(r["k"]) for r in rows}
        assert ks == {10, 20, 30, 40, 50}  # thin grid united with checkpoints
        # 17-significant-digit texts survive a write/parse/format round trip
        for r in rows[:50]:
            assert r["x_1"] == format(float(r["x_1"]), ".17g")

    def test_sqrt_eta_smoothing_scale(self, tmp_path):
        out = tmp_path / "o"
        doc = _sample_doc(out, eta=0.04)
        doc["smoothing"] = {"enabled": True, "mu": "sqrt_eta", "p": 2.0}
        cfgp = _write_config(tmp_path / "c.json", doc)
        assert main(["sample", "--config", cfgp]) == 0
        meta = _read_meta(out)
        assert float(meta["mu"]) == pytest.approx(0.2, rel=1e-15)
        assert meta["p"] == "2"

    def test_all_diverged_exits_3(self, tmp_path, capsys):
        out = tmp_path / "o"
        doc = _sample_doc(out, eta=2.5, n_chains=3, n_steps=200, thin=200)
        cfgp = _write_config(tmp_path / "c.json", doc)
        assert main(["sample", "--config", cfgp]) == 3
        assert "every chain diverged" in capsys.readouterr().err
        assert _read_meta(out)["n_diverged"] == "3"


class TestDiagnose:
    def _sampled_gaussian(self, tmp_path):
        out = tmp_path / "runout"
        doc = _sample_doc(
            out, n_chains=2000, n_steps=400, eta=0.01, thin=100, seed=11, init_cov=4.0
        )
        doc["output"]["checkpoints"] = "geometric"
        cfgp = _write_config(tmp_path / "c.json", doc)
        assert main(["sample", "--config", cfgp]) == 0
        return cfgp, out

    def test_missing_sample_file_exits_4(self, tmp_path, capsys):
        cfgp = _write_config(tmp_path / "c.json", _sample_doc(tmp_path / "empty"))
        assert main(["diagnose", "--config", cfgp]) == 4
        assert "cannot use sample file" in capsys.readouterr().err

    def test_dimension_mismatch_exits_4(self, tmp_path, capsys):
        cfgp, out = self._sampled_gaussian(tmp_path)
        doc2 = _sample_doc(out)
        doc2["potential"]["dim"] = 2
        cfg2 = _write_config(tmp_path / "c2.json", doc2)
        assert main([
            "diagnose", "--config", cfg2, "--samples", str(out / "samples.csv"),
        ]) == 4
        assert "coordinate columns" in capsys.readouterr().err

    def test_report_invariants_and_figures(self, tmp_path):
        cfgp, out = self._sampled_gaussian(tmp_path)
        assert main(["diagnose", "--config", cfgp, "--out", str(out)]) == 0
        rows = _read_rows(out / "diagnostics.csv")
        assert len(rows) > 5
        for r in rows:
            assert r["kl_method"] == "gaussian_exact"
            kl = float(r["kl"])
            assert kl >= 0.0
            assert 0.0 <= float(r["tv"]) <= 1.0
            assert float(r["w2"]) >= 0.0
            assert float(r["m_2"]) > 0.0
            assert float(r["tv_from_kl"]) == pytest.approx(
                math.sqrt(kl / 2.0), rel=1e-12
            )
            assert float(r["t"]) == pytest.approx(int(r["k"]) * 0.01, rel=1e-15)
            for col in ("kl", "tv", "w2", "m_2", "m_4"):
                assert r[col] == format(float(r[col]), ".17g")
        # the exact oracle decays along the geometric checkpoint ladder
        kls = [float(r["kl"]) for r in sorted(rows, key=lambda r: int(r["k"]))]
        assert all(b <= a + 1e-15 for a, b in zip(kls, kls[1:]))
        for fig in ("kl_decay.png", "density_overlay.png"):
            assert (out / fig).stat().st_size > 0

    def test_histogram_kl_needs_enough_samples_unless_forced(self, tmp_path):
        out = tmp_path / "pow"
        doc = {
            "potential": {"name": "power", "dim": 1, "params": {"alpha": 0.5}},
            "run": {"n_chains": 500, "n_steps": 100, "eta": 0.005, "thin": 50, "seed": 2},
            "output": {"dir": str(out), "checkpoints": [100]},
        }
        cfgp = _write_config(tmp_path / "c.json", doc)
        assert main(["sample", "--config", cfgp]) == 0
        assert main(["diagnose", "--config", cfgp, "--out", str(out)]) == 0
        rows = _read_rows(out / "diagnostics.csv")
        assert all(r["kl_method"] == "none" and r["kl"] == "" for r in rows)
        assert main([
            "diagnose", "--config", cfgp, "--out", str(out), "--allow-few",
        ]) == 0
        rows = _read_rows(out / "diagnostics.csv")
        assert all(r["kl_method"] == "quadrature" for r in rows)
        assert all(float(r["kl"]) >= 0.0 for r in rows)
