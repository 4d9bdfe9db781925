import numpy as np

from qalign.bench import BenchReport, LatencyStats, compare_reports
from qalign.plotting import figure_path, plot_activation_magnitudes, plot_pareto, plot_score_histogram, plot_tradeoff
from qalign.search import QuantConfig, SearchSpace, TrialResult, run_search


def _is_png(path):
    return path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_figure_path():
    assert figure_path("out/report.json").as_posix() == "out/report.png"
    assert figure_path("a.csv", "_x").name == "a_x.png"


def test_plots_write_pngs(tmp_path):
    mags = np.abs(np.random.default_rng(0).normal(size=(20, 8)))
    assert _is_png(plot_activation_magnitudes(mags, tmp_path / "a.png", "layer", quantized=mags * 0.9))

    space = SearchSpace(tuple(QuantConfig(alpha=a) for a in (0.0, 0.5, 1.0)))
    out = run_search(space, TrialResult(None, 1.0, 100.0), lambda c: TrialResult(c, 1.0 - c.alpha / 100, 50 + 10 * c.alpha))
    assert _is_png(plot_pareto(out, tmp_path / "p.png"))

    base = BenchReport("fp32", LatencyStats(19.9, 20.2, 19.6), 438.0, 2.2127)
    opt = BenchReport("int8", LatencyStats(1.21, 1.22, 1.20), 166.44, 0.1346)
    assert _is_png(plot_tradeoff(base, opt, compare_reports(base, opt), tmp_path / "t.png"))
    assert _is_png(plot_score_histogram([0.1, 0.5, 0.9], tmp_path / "h.png", [0, 0.5, 1]))
