import matplotlib.pyplot as plt
import numpy as np

from ccsnd import plotting
from ccsnd.simulator import ErrorStats


def _stats(snr, pe, miss, trials=20):
    return ErrorStats(snr, trials, pe, 0.1, max(pe - 0.1, 0.0), pe + 0.1, miss, 0.01, 0.0, 0)


def test_plot_keeps_small_rates_and_lifts_zeros(tmp_path, monkeypatch):
    captured = {}
    monkeypatch.setattr(plt, "close", lambda fig: captured.setdefault("fig", fig))
    stats = [_stats(-4.0, 0.15, 0.02), _stats(0.0, 0.0, 0.01), _stats(4.0, 0.1, 0.0)]
    path = tmp_path / "f.png"
    plotting.plot_error_curves(stats, path)
    assert path.stat().st_size > 0
    ax = captured["fig"].axes[0]
    curves = {line.get_label(): line.get_ydata() for line in ax.get_lines() if not line.get_label().startswith("_")}
    np.testing.assert_allclose(curves["missed rate"], [0.02, 0.01, 0.025])
    (pe_line, _, _), = ax.containers
    np.testing.assert_allclose(pe_line.get_ydata(), [0.15, 0.025, 0.1])
    plt.close(captured["fig"])
