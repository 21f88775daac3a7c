import math

import numpy as np
import pytest

from qpvlab import errmodel
from qpvlab.cli import main
from qpvlab.plots import CurveBundle, PlotDataError, read_curve, render


def _write_sweep_csv(path, label_d, thetas, values):
    with open(path, "w") as fh:
        fh.write("# command=sweep\n")
        fh.write(f"# d={label_d}\n")
        fh.write("theta,p_err,d,restarts,seed,warm_start\n")
        for t, v in zip(thetas, values):
            fh.write(f"{t},{v},{label_d},10,0,0\n")


@pytest.fixture
def d1_csv(tmp_path):
    thetas = np.linspace(0, math.pi / 4, 33)
    values = [errmodel.pgm_p_err(t) + 1e-7 for t in thetas]
    path = tmp_path / "sweep_d1.csv"
    _write_sweep_csv(path, 1, thetas, values)
    return path


@pytest.fixture
def d2_csv(tmp_path):
    thetas = np.linspace(0, math.pi / 4, 33)
    values = [errmodel.d2_piecewise_p_err(t) for t in thetas]
    path = tmp_path / "sweep_d2.csv"
    _write_sweep_csv(path, 2, thetas, values)
    return path


class TestReadCurve:
    def test_roundtrip(self, d1_csv):
        thetas, values = read_curve(d1_csv, "theta")
        assert len(thetas) == 33 and thetas[0] == 0.0

    def test_missing_column(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        with pytest.raises(PlotDataError):
            read_curve(bad, "theta")

    def test_empty_csv(self, tmp_path):
        bad = tmp_path / "empty.csv"
        bad.write_text("# d=1\ntheta,p_err\n")
        with pytest.raises(PlotDataError):
            read_curve(bad, "theta")


class TestRender:
    def test_d1_deviation_reported(self, d1_csv, tmp_path):
        out = tmp_path / "fig.png"
        bundle = CurveBundle(curves=(("d=1", str(d1_csv)),))
        deviation = render(bundle, str(out))
        assert out.exists()
        assert deviation is not None and deviation < 2e-4

    def test_two_curves_with_overlays(self, d1_csv, d2_csv, tmp_path):
        out = tmp_path / "fig.png"
        bundle = CurveBundle(
            curves=(("d=1", str(d1_csv)), ("d=2", str(d2_csv))),
            logscale=True,
        )
        assert render(bundle, str(out)) < 2e-4

    def test_deterministic_bytes(self, d1_csv, d2_csv, tmp_path):
        bundle = CurveBundle(
            curves=(("d=1", str(d1_csv)), ("d=2", str(d2_csv)))
        )
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        render(bundle, str(a))
        render(bundle, str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_deterministic_svg(self, d1_csv, tmp_path):
        bundle = CurveBundle(curves=(("d=1", str(d1_csv)),))
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        render(bundle, str(a))
        render(bundle, str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_empty_bundle_writes_nothing(self, tmp_path):
        out = tmp_path / "fig.png"
        with pytest.raises(PlotDataError):
            render(CurveBundle(curves=()), str(out))
        assert not out.exists()

    def test_multibase_points(self, tmp_path):
        path = tmp_path / "multibase_d1.csv"
        with open(path, "w") as fh:
            fh.write("n,p_err\n")
            for n in range(2, 9):
                fh.write(f"{n},{errmodel.multibase_d1_p_err(n)}\n")
        out = tmp_path / "fig.png"
        bundle = CurveBundle(curves=(("d=1", str(path)),), multibase=True)
        deviation = render(bundle, str(out))
        assert deviation < 1e-12 and out.exists()


class TestCliPlot:
    def test_end_to_end(self, tmp_path, capsys):
        csv_path = tmp_path / "sweep_d1.csv"
        assert main(["sweep", "--d", "1", "--grid", "9", "--restarts", "20",
                     "--out", str(csv_path)]) == 0
        out = tmp_path / "fig.png"
        assert main(["plot", str(csv_path), "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        assert "max deviation" in printed
        assert out.exists()

    def test_no_inputs_is_usage_error(self, tmp_path, capsys):
        assert main(["plot"]) == 2
        capsys.readouterr()
