import json
import math

import numpy as np
import pytest

from maxent_oie.cli import main, read_csv
from maxent_oie.core import Dataset
from maxent_oie.modelfile import save_model
from maxent_oie.solver import fit_maxent
from maxent_oie.support import SupportRegion

import scenarios


def write_csv(path, rows, header=None):
    rows = np.atleast_2d(np.asarray(rows, dtype=float).T).T
    lines = [header] if header else []
    lines += [",".join(repr(float(v)) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def strip_metadata(text):
    """Model file text with the trailing non-fingerprinted metadata block removed."""
    return text[: text.index('"metadata"')]


@pytest.fixture
def uniform_csv(tmp_path):
    return write_csv(tmp_path / "u.csv", np.random.default_rng(0).uniform(0, 1, 5000), header="x")


@pytest.fixture
def uniform_model(tmp_path):
    """Degree-2 model of the exactly uniform density on [0, 1]."""
    data = Dataset(np.array([0.0, 0.5, 1.0]))  # moments (0, 1/3) on the scaled axis are reached below
    support = SupportRegion.box([(0, 1)])
    from maxent_oie.core import MomentBasis, SampleMoments, fit_scaling
    from maxent_oie.quadrature import build_grid
    from maxent_oie.solver import solve_dual

    basis = MomentBasis.monomial(1, 2, fit_scaling(data, support))
    fit = solve_dual(build_grid(support, basis), SampleMoments(np.array([0.0, 1 / 3]), basis, 3))
    path = tmp_path / "uniform.json"
    save_model(str(path), fit, data)
    return str(path)


class TestInput:
    def test_header_is_skipped(self, tmp_path):
        p = write_csv(tmp_path / "h.csv", [[1, 2], [3, 4]], header="a,b")
        assert read_csv(p).points.tolist() == [[1.0, 2.0], [3.0, 4.0]]

    def test_malformed_row_names_line(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("x\n0.1\n0.2\nabc\n0.3\n")
        assert main(["fit", str(p)]) == 2
        assert "line 4" in capsys.readouterr().err

    def test_ragged_rows(self, tmp_path, capsys):
        p = tmp_path / "ragged.csv"
        p.write_text("1,2\n3\n")
        assert main(["fit", str(p)]) == 2
        assert "line 2" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["fit", str(tmp_path / "nope.csv")]) == 2


class TestFit:
    def test_smoke(self, tmp_path, capsys):
        p = write_csv(tmp_path / "s.csv", [-1.0, 0.0, 1.0])
        out = tmp_path / "m.json"
        assert main(["fit", p, "--degree", "2", "--support", "box:-2,2", "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "lambda_hat" in text and "L=2" in text and "H_min" in text and "evidence" in text
        mass = float(text.split("integral of density:")[1].split()[0])
        assert abs(mass - 1.0) < 1e-10
        assert json.loads(out.read_text())["basis"]["max_degree"] == 2

    def test_sweep_selects_two(self, tmp_path, capsys):
        p = write_csv(tmp_path / "u.csv", np.random.default_rng(0).uniform(-1, 1, scenarios.N_LARGE))
        assert main(["fit", p, "--sweep", "2,4,6", "--support", "box:-1,1"]) == 0
        assert "selected A=2" in capsys.readouterr().out

    def test_auto_support_pads_ten_percent(self, uniform_csv, capsys):
        out = uniform_csv + ".json"
        assert main(["fit", uniform_csv, "--degree", "2", "--out", out]) == 0
        x = read_csv(uniform_csv).points[:, 0]
        span = x.max() - x.min()
        support = json.loads(open(out).read())["support"]
        assert support["low"][0] == pytest.approx(x.min() - 0.1 * span, rel=1e-12)
        assert support["high"][0] == pytest.approx(x.max() + 0.1 * span, rel=1e-12)

    def test_nonconvergence_exits_one(self, uniform_csv, capsys):
        assert main(["fit", uniform_csv, "--degree", "8", "--max-iters", "1", "--tol", "1e-14"]) == 1
        assert "hint" in capsys.readouterr().err

    def test_infeasible_reports_hint(self, tmp_path, capsys):
        p = write_csv(tmp_path / "b.csv", [1.0, 1.0, 1.0])
        assert main(["fit", p, "--degree", "2", "--support", "box:0,1"]) == 1
        assert "enlarge the support" in capsys.readouterr().err

    def test_point_outside_support(self, tmp_path, capsys):
        p = write_csv(tmp_path / "o.csv", [0.5, 3.0])
        assert main(["fit", p, "--support", "box:0,1"]) == 2
        assert "row 1" in capsys.readouterr().err

    def test_verbose_dumps_trace(self, uniform_csv, capsys):
        assert main(["fit", uniform_csv, "--degree", "2", "--verbose"]) == 0
        assert "iter,dual_value,grad_norm" in capsys.readouterr().err

    def test_determinism(self, uniform_csv, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert main(["fit", uniform_csv, "--sweep", "2,4", "--out", str(out)]) == 0
        assert strip_metadata(a.read_text()) == strip_metadata(b.read_text())

    def test_thread_cap_changes_nothing(self, uniform_csv, tmp_path, monkeypatch):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["fit", uniform_csv, "--out", str(a)]) == 0
        monkeypatch.setenv("MAXENT_THREADS", "1")
        assert main(["fit", uniform_csv, "--out", str(b)]) == 0
        assert strip_metadata(a.read_text()) == strip_metadata(b.read_text())


class TestEval:
    def test_at_inside(self, uniform_model, capsys):
        assert main(["eval", uniform_model, "--at", "0.5"]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(1.0, abs=1e-12)

    def test_at_outside_warns(self, uniform_model, capsys):
        assert main(["eval", uniform_model, "--at", "1.5"]) == 0
        cap = capsys.readouterr()
        assert float(cap.out) == 0.0 and "warning" in cap.err

    def test_wrong_dimension(self, uniform_model, capsys):
        assert main(["eval", uniform_model, "--at", "0.1,0.2"]) == 2

    def test_table_integrates(self, uniform_csv, tmp_path):
        model = tmp_path / "m.json"
        assert main(["fit", uniform_csv, "--degree", "4", "--out", str(model)]) == 0
        table = tmp_path / "t.csv"
        assert main(["eval", str(model), "--table", "101", "--out", str(table)]) == 0
        arr = np.loadtxt(table, delimiter=",", skiprows=1)
        assert arr.shape == (101, 2)
        assert abs(np.trapezoid(arr[:, 1], arr[:, 0]) - 1.0) <= 1e-3

    def test_matches_in_process(self, uniform_csv, tmp_path, capsys):
        model = tmp_path / "m.json"
        main(["fit", uniform_csv, "--degree", "4", "--out", str(model)])
        capsys.readouterr()
        data = read_csv(uniform_csv)
        from maxent_oie.density import MaxEntDensity, density_at
        from maxent_oie.support import parse_support

        fit = fit_maxent(data, parse_support("auto", data.points, 1), 4)
        main(["eval", str(model), "--at", "0.37"])
        assert float(capsys.readouterr().out) == density_at(MaxEntDensity.from_fit(fit), [0.37])

    def test_plot_written(self, uniform_model, tmp_path):
        png = tmp_path / "d.png"
        assert main(["eval", uniform_model, "--plot", str(png)]) == 0
        assert png.read_bytes()[:4] == b"\x89PNG"


@pytest.fixture
def exy_model(tmp_path):
    path = tmp_path / "exy.json"
    save_model(str(path), scenarios.exy_exact_fit(), Dataset(np.array([[0.5, 0.5]])))
    return str(path)


class TestConditional:
    def test_uniform_joint(self, tmp_path, capsys):
        data = Dataset(np.random.default_rng(3).uniform(0, 1, (4000, 2)))
        from maxent_oie.core import MomentBasis, SampleMoments, fit_scaling
        from maxent_oie.quadrature import build_grid
        from maxent_oie.solver import solve_dual

        support = SupportRegion.box([(0, 1), (0, 1)])
        basis = MomentBasis.monomial(2, 2, fit_scaling(data, support))
        fit = solve_dual(build_grid(support, basis), SampleMoments(np.array([0, 0, 1 / 3, 0, 1 / 3]), basis, 10))
        path = tmp_path / "u2.json"
        save_model(str(path), fit, data)
        assert main(["conditional", str(path), "--given", "0.3", "--expect"]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(0.5, abs=1e-12)

    def test_exy_expectation(self, exy_model, capsys):
        assert main(["conditional", exy_model, "--given", "1", "--expect"]) == 0
        value = float(capsys.readouterr().out)
        assert value == pytest.approx(1 / (math.e - 1), abs=1e-6)
        assert round(value, 5) == 0.58198

    def test_exy_table(self, exy_model, tmp_path):
        out = tmp_path / "c.csv"
        assert main(["conditional", exy_model, "--given", "1", "--table", "--out", str(out)]) == 0
        arr = np.loadtxt(out, delimiter=",", skiprows=1)
        np.testing.assert_allclose(arr[:, 1], np.exp(arr[:, 0]) / (math.e - 1), rtol=0, atol=1e-6)

    def test_outside_projection(self, exy_model, capsys):
        assert main(["conditional", exy_model, "--given", "1.5", "--expect"]) == 2
        assert "[0, 1]" in capsys.readouterr().err

    def test_one_dimensional_model_rejected(self, uniform_model):
        assert main(["conditional", uniform_model, "--given", "0.5"]) == 2

    def test_plot_written(self, exy_model, tmp_path):
        png = tmp_path / "c.png"
        assert main(["conditional", exy_model, "--given", "0.5", "--expect", "--plot", str(png)]) == 0
        assert png.stat().st_size > 0


class TestCompare:
    def fit_model(self, csv, tmp_path, *extra):
        out = tmp_path / ("m%d.json" % len(list(tmp_path.glob("m*.json"))))
        assert main(["fit", csv, "--degree", "2", "--out", str(out), *extra]) == 0
        return str(out)

    def test_no_rivals(self, uniform_csv, tmp_path, capsys):
        model = self.fit_model(uniform_csv, tmp_path)
        capsys.readouterr()
        assert main(["compare", "--data", uniform_csv, "--benchmark", model, "--json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["models"][0]["id"] == "0" and report["models"][0]["posterior"] == 1.0

    def test_identical_rival(self, uniform_csv, tmp_path, capsys):
        model = self.fit_model(uniform_csv, tmp_path)
        doc = json.loads(open(model).read())
        rival = f"twin:{doc['log_likelihood']!r}:2"
        capsys.readouterr()
        assert main(["compare", "--data", uniform_csv, "--benchmark", model, "--rival", rival, "--json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert [m["posterior"] for m in report["models"]] == [0.5, 0.5]

    def test_poor_rivals_flagged(self, uniform_csv, tmp_path, capsys):
        model = self.fit_model(uniform_csv, tmp_path)
        capsys.readouterr()
        out = tmp_path / "r.json"
        png = tmp_path / "p.png"
        args = ["compare", "--data", uniform_csv, "--benchmark", model, "--rival", "bad:-1e6:1", "--out", str(out)]
        assert main(args + ["--plot", str(png)]) == 0
        cap = capsys.readouterr()
        assert "model 0" in cap.out and "all rival models fit poorly" in cap.err
        assert json.loads(out.read_text())["mode"] == "unconditional"
        assert png.stat().st_size > 0

    def test_fingerprint_mismatch(self, uniform_csv, tmp_path, capsys):
        model = self.fit_model(uniform_csv, tmp_path)
        other = write_csv(tmp_path / "other.csv", np.random.default_rng(5).uniform(0, 1, 100))
        assert main(["compare", "--data", other, "--benchmark", model]) == 2
        assert "fingerprint" in capsys.readouterr().err

    def test_bad_rival_format(self, uniform_csv, tmp_path):
        model = self.fit_model(uniform_csv, tmp_path)
        assert main(["compare", "--data", uniform_csv, "--benchmark", model, "--rival", "oops"]) == 2

    def test_conditional_needs_marginal(self, tmp_path, capsys):
        csv = write_csv(tmp_path / "xy.csv", scenarios.linear_gaussian(np.random.default_rng(0), 2000))
        model = self.fit_model(csv, tmp_path)
        capsys.readouterr()
        assert main(["compare", "--data", csv, "--benchmark", model, "--conditional"]) == 2
        assert "--marginal" in capsys.readouterr().err

    def test_conditional_linear_gaussian(self, tmp_path, capsys):
        rng = np.random.default_rng(2718)
        xy = scenarios.linear_gaussian(rng)
        csv = write_csv(tmp_path / "xy.csv", xy)
        xcsv = write_csv(tmp_path / "x.csv", xy[:, :1])
        joint, marg = tmp_path / "joint.json", tmp_path / "marg.json"
        assert main(["fit", csv, "--sweep", "2,4,6", "--support", "box:-0.1,1.1;0,1.3", "--out", str(joint)]) == 0
        degree = json.loads(joint.read_text())["selection"]["selected_degree"]
        assert main(["fit", xcsv, "--degree", str(degree), "--support", "box:-0.1,1.1", "--out", str(marg)]) == 0
        loglik, k = scenarios.fit_conditional_rival(xy[:, 0], xy[:, 1], True)
        capsys.readouterr()
        args = ["compare", "--conditional", "--data", csv, "--benchmark", str(joint), "--marginal", str(marg),
                "--rival", f"linear:{float(loglik)!r}:{k}", "--json"]
        assert main(args) == 0
        models = json.loads(capsys.readouterr().out)["models"]
        assert models[1]["id"] == "linear" and models[1]["posterior"] > 0.9
        assert abs(sum(m["posterior"] for m in models) - 1.0) <= 1e-12
