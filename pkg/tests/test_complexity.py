import json
from fractions import Fraction

import numpy as np
import pytest

from lcasc.cnn7 import build_cnn7
from lcasc.complexity import count_params, decomposition_ratios, ensemble_size
from lcasc.nn import Network, load_checkpoint, save_checkpoint


def hand_ledger(ladder, decompose, classes=10, with_bn=True):
    """Layer-by-layer count written independently of the auditor."""
    total, c_in = 0, 3
    for c_out in ladder:
        if decompose and c_in % 4 == 0:
            total += 9 * (c_in // 4) * (c_out // 4) + 2 * (c_in // 2) * (c_out // 4) + c_in * (c_out // 4)
        else:
            total += 9 * c_in * c_out
        total += c_out
        if with_bn:
            total += 2 * c_in + 2 * c_out
        c_in = c_out
    return total + c_in * classes + classes


BASE = (32, 32, 64, 64, 128, 128)
CR = (16, 32, 32, 32, 64, 64)


@pytest.mark.parametrize("variant,ladder,dc", [("baseline", BASE, False), ("cr", CR, False), ("crdc", CR, True)])
def test_totals_match_hand_ledger(variant, ladder, dc):
    r = count_params(build_cnn7(variant))
    assert r.total_params == hand_ledger(ladder, dc)
    assert r.total_params_excl_bn == hand_ledger(ladder, dc, with_bn=False)
    assert r.total_kb == r.total_params * 4 / 1024


def test_frozen_totals():
    # values from hand_ledger above
    assert count_params(build_cnn7("baseline")).total_params == 289840
    assert count_params(build_cnn7("cr")).total_params == 80496
    assert count_params(build_cnn7("crdc")).total_params == 11408
    assert count_params(build_cnn7("crdc")).total_params_excl_bn == 10570


def test_conv_row():
    r = count_params(build_cnn7("baseline"))
    row = next(x for x in r.rows if x.name == "block2.conv")
    assert (row.weights, row.biases) == (9216, 32)


def test_rows_sum_to_total():
    r = count_params(build_cnn7("crdc"))
    assert sum(x.total for x in r.rows) == r.total_params
    assert all(x.total == 0 for x in r.rows if x.kind in ("ReLU", "AvgPool", "Dropout", "Softmax", "GlobalAvgPool"))


def test_decomposition_ratios():
    ratios = decomposition_ratios(build_cnn7("crdc"))
    assert len(ratios) == 5
    assert set(ratios.values()) == {Fraction(17, 144)}


@pytest.mark.parametrize("variant", ["baseline", "cr", "crdc"])
def test_audit_matches_optimizer_tensors(tmp_path, variant):
    spec = build_cnn7(variant, 10, (16, 16, 3))
    net = Network(spec)
    save_checkpoint(tmp_path / "m.ckpt", net)
    _, header = load_checkpoint(tmp_path / "m.ckpt")
    stored = sum(int(np.prod(t["shape"])) for t in header["tensors"] if t["trainable"])
    assert stored == count_params(spec).total_params == net.parameter_count()


def test_ensemble_size():
    r = count_params(build_cnn7("crdc"))
    assert ensemble_size([r]) == r.total_kb
    assert ensemble_size([r] * 3, include_bn=False) == pytest.approx(3 * r.total_kb_excl_bn)
    with pytest.raises(ValueError):
        ensemble_size([])


def test_report_emitters():
    r = count_params(build_cnn7("cr"))
    d = json.loads(r.to_json())
    assert d["total_params"] == r.total_params and len(d["rows"]) == len(r.rows)
    text = r.to_text()
    assert "block6.conv" in text and "BN excluded" in text
