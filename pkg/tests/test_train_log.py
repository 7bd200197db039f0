from pathlib import Path

import pytest

from tvsim.train_log import TrainLog, TrainLogRow, column_values, metrics_columns, read_metrics_csv, write_metrics_csv


def _row(epoch, train_ce=1.0, test01=None):
    return TrainLogRow(
        epoch=epoch,
        train_ce=train_ce,
        test01=test01 if test01 is not None else {"icl": 0.5},
        aVa=[0.1, 0.2],
        bVb=[0.01, 0.02],
        aKQa=[1.0, 1.5],
        bKQb=[0.0, 0.0],
        v_cross_max=0.0,
        kq_cross_max=0.1,
        cos_a_star=0.9,
        cos_b_max=0.05,
        cos_other_max=0.1,
        attn_max=0.3,
        attn_entropy=1.2,
        confidence=0.7,
    )


def test_header_depends_only_on_k():
    cols = metrics_columns(2)
    assert cols[:5] == ["epoch", "train_ce", "test01_icl", "test01_qa", "test01_qaicl"]
    assert "aVa_1" in cols and "bKQb_0" in cols
    assert cols[-1] == "confidence"
    assert len(metrics_columns(3)) == len(cols) + 4


def test_csv_leaves_unevaluated_distributions_blank(tmp_path: Path):
    log = TrainLog(K=2)
    log.append(_row(0, 2.0))
    log.append(_row(10, 0.1 + 0.2))
    path = write_metrics_csv(log, tmp_path / "metrics.csv")

    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[1].startswith("0,2.0,0.5,,,")
    assert ",0.30000000000000004," in lines[2]

    header, rows = read_metrics_csv(path)
    assert header == metrics_columns(2)
    assert rows[1]["train_ce"] == 0.1 + 0.2
    assert rows[0]["test01_qa"] is None
    assert column_values(rows, "epoch") == [0.0, 10.0]


def test_log_rejects_out_of_order_and_non_finite_rows():
    log = TrainLog(K=2)
    log.append(_row(5))
    with pytest.raises(ValueError, match="must increase"):
        log.append(_row(5))
    with pytest.raises(ValueError, match="non-finite"):
        log.append(_row(6, train_ce=float("nan")))
    assert len(log) == 1


def test_series_and_matrix_views():
    log = TrainLog(K=2)
    log.append(_row(0))
    log.append(_row(1, test01={"qa": 0.25}))
    assert log.matrix("aVa").shape == (2, 2)
    icl = log.series("test01_icl")
    assert icl[0] == 0.5
    assert icl[1] != icl[1]  # NaN for the missing cell
    assert list(log.epochs) == [0, 1]


def test_read_rejects_malformed_csv(tmp_path: Path):
    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(ValueError, match="empty"):
        read_metrics_csv(empty)
    wrong = tmp_path / "wrong.csv"
    wrong.write_text("step,loss\n1,2\n", encoding="utf-8")
    with pytest.raises(ValueError, match="unexpected metrics header"):
        read_metrics_csv(wrong)
    text = tmp_path / "text.csv"
    text.write_text("epoch,train_ce\n0,abc\n", encoding="utf-8")
    with pytest.raises(ValueError, match="not numeric"):
        read_metrics_csv(text)
