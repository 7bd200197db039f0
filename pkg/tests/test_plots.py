from pathlib import Path

import pytest

from tvsim.plots import PANELS, emit_plots, render_panel
from tvsim.train_log import TrainLog, TrainLogRow, metrics_columns, write_metrics_csv


def _write_log(path: Path, epochs=(0, 10, 20)) -> Path:
    log = TrainLog(K=2)
    for e in epochs:
        log.append(
            TrainLogRow(
                epoch=e,
                train_ce=1.0 / (e + 1),
                test01={"icl": 0.5, "qa_icl": 0.4},
                aVa=[0.01 * e, 0.02 * e],
                bVb=[0.0, 0.0],
                aKQa=[0.1, 0.1],
                bKQb=[0.0, 0.0],
                v_cross_max=0.0,
                kq_cross_max=0.0,
                cos_a_star=0.0,
                cos_b_max=0.0,
                cos_other_max=0.0,
                attn_max=0.0,
                attn_entropy=0.0,
                confidence=0.0,
            )
        )
    return write_metrics_csv(log, path)


def test_emit_plots_writes_four_panels(tmp_path: Path):
    csv_path = _write_log(tmp_path / "metrics.csv")
    written = emit_plots(csv_path, tmp_path / "plots")
    assert [p.name for p in written] == [p.filename for p in PANELS]

    losses = (tmp_path / "plots" / "test_losses.svg").read_text(encoding="utf-8")
    assert losses.startswith("<svg")
    assert 'data-series="test01_icl"' in losses
    assert 'data-series="test01_qaicl"' in losses
    # never evaluated, so no line
    assert 'data-series="test01_qa"' not in losses

    values = (tmp_path / "plots" / "v_projections.svg").read_text(encoding="utf-8")
    assert values.count("<polyline") == 4


def test_header_only_csv_still_draws_axes():
    svg = render_panel(PANELS[0], metrics_columns(2), [])
    assert 'class="axis"' in svg
    assert "<polyline" not in svg


def test_single_point_series_has_finite_coordinates(tmp_path: Path):
    csv_path = _write_log(tmp_path / "metrics.csv", epochs=(0,))
    emit_plots(csv_path, tmp_path / "plots")
    svg = (tmp_path / "plots" / "train_loss.svg").read_text(encoding="utf-8")
    assert "nan" not in svg and "inf" not in svg


def test_malformed_csv_is_rejected(tmp_path: Path):
    bad = tmp_path / "metrics.csv"
    bad.write_text("epoch,train_ce\n0,1.0,extra\n", encoding="utf-8")
    with pytest.raises(ValueError, match="expected 2 cells"):
        emit_plots(bad, tmp_path / "plots")
