import json

import pytest
from hypothesis import given, strategies as st

from captrade.tradeoff import (TradeoffError, TradeoffPoint, boundary_to_csv, tcr, tpr, tpr_values,
                               tradeoff_report, zero_tpr_boundary)

HUMAN = TradeoffPoint("Human (leave-one-out)", 87.8, 88.6)
VAT_MSC = TradeoffPoint("VaT_msc", 130.3, 44.9)
VAT_NSC = TradeoffPoint("VaT_nsc", 131.2, 43.3)

# accurate models of the diversity table: (CIDEr, self-CIDEr)
ACCURATE = [
    TradeoffPoint("Att2in", 119.5, 27.3),
    TradeoffPoint("UpDown", 123.8, 31.9),
    TradeoffPoint("AoA", 127.0, 32.4),
    TradeoffPoint("Transformer", 130.1, 38.5),
    TradeoffPoint("M2Transformer", 129.0, 38.2),
    VAT_MSC,
    VAT_NSC,
]

pos = st.floats(0.5, 500, allow_nan=False)


def test_tpr_identity():
    assert tpr(HUMAN, HUMAN) == 0.0


def test_tpr_vat_msc_against_human():
    # 0.5 * (42.5 / 87.8 - 43.7 / 88.6)
    hand = 0.5 * (42.5 / 87.8 - 43.7 / 88.6)
    assert tpr(VAT_MSC, HUMAN) == pytest.approx(hand, rel=1e-12)
    assert 100 * tpr(VAT_MSC, HUMAN) == pytest.approx(-0.459, abs=0.005)


def test_tpr_vat_nsc_against_human():
    hand = 0.5 * (43.4 / 87.8 - 45.3 / 88.6)
    assert tpr(VAT_NSC, HUMAN) == pytest.approx(hand, rel=1e-12)
    assert 100 * tpr(VAT_NSC, HUMAN) == pytest.approx(-0.849, abs=0.005)


def test_tcr_table_rows():
    # (51.3 / 38.5) / (16.1 / 130.1) and (46.9 / 44.9) / (15.9 / 130.3)
    assert tcr(TradeoffPoint("ce", 114.0, 89.8), TradeoffPoint("rl", 130.1, 38.5)) == \
        pytest.approx((51.3 / 38.5) / (16.1 / 130.1), rel=1e-12)
    assert tcr(TradeoffPoint("ce", 114.4, 91.8), VAT_MSC) == pytest.approx(8.56, abs=0.01)


def test_tcr_no_diversity_change():
    assert tcr(TradeoffPoint("ce", 100.0, 50.0), TradeoffPoint("rl", 120.0, 50.0)) == 0.0


def test_tcr_equal_accuracy():
    with pytest.raises(TradeoffError):
        tcr(TradeoffPoint("ce", 100.0, 60.0), TradeoffPoint("rl", 100.0, 50.0))


@pytest.mark.parametrize("acc, div", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0), (float("nan"), 1.0)])
def test_point_validation(acc, div):
    with pytest.raises(TradeoffError):
        TradeoffPoint("bad", acc, div)


def test_boundary_endpoints():
    assert zero_tpr_boundary(HUMAN, [87.8]) == [(87.8, 88.6)]
    assert zero_tpr_boundary(HUMAN, [2 * 87.8])[0][1] == 0.0
    (acc, div), = zero_tpr_boundary(HUMAN, [130.3])
    assert div == pytest.approx(88.6 * (2 - 130.3 / 87.8), rel=1e-12)
    assert div == pytest.approx(45.71, abs=0.01)
    assert div - VAT_MSC.div == pytest.approx(0.81, abs=0.01)


@given(pos, pos, st.lists(st.floats(0, 1000), min_size=1, max_size=10))
def test_boundary_points_have_zero_tpr(bacc, bdiv, accs):
    b = TradeoffPoint("b", bacc, bdiv)
    for acc, div in zero_tpr_boundary(b, accs):
        assert abs(tpr_values(acc, div, b)) <= 1e-12 * max(1.0, acc / bacc)


@given(pos, pos, pos, pos, st.floats(-10, 10))
def test_tpr_affine(acc, div, bacc, bdiv, delta):
    b = TradeoffPoint("b", bacc, bdiv)
    base = tpr_values(acc, div, b)
    assert tpr_values(acc + delta, div, b) - base == pytest.approx(delta / (2 * bacc), abs=1e-9)
    assert tpr_values(acc, div + delta, b) - base == pytest.approx(delta / (2 * bdiv), abs=1e-9)


@given(pos, pos, pos, pos, st.floats(0.1, 10), st.floats(0.1, 10))
def test_tcr_scale_invariant(a1, d1, a2, d2, sa, sd):
    if a1 == a2 or a1 * sa == a2 * sa:
        return
    ce, rl = TradeoffPoint("ce", a1, d1), TradeoffPoint("rl", a2, d2)
    ce2, rl2 = TradeoffPoint("ce", a1 * sa, d1 * sd), TradeoffPoint("rl", a2 * sa, d2 * sd)
    assert tcr(ce2, rl2) == pytest.approx(tcr(ce, rl), rel=1e-9, abs=1e-12)


def test_report_single_point():
    rep = tradeoff_report([HUMAN], HUMAN)
    assert [r["tpr"] for r in rep["tpr"]] == [0.0]
    assert rep["tcr"] == []
    assert rep["baseline"] == {"label": HUMAN.label, "acc": 87.8, "div": 88.6}


def test_report_ranking_of_accurate_models():
    rep = tradeoff_report(ACCURATE, HUMAN)
    ranked = sorted(rep["tpr"], key=lambda r: abs(r["tpr"]))
    assert [r["label"] for r in ranked[:2]] == ["VaT_msc", "VaT_nsc"]
    assert all(r["tpr"] < 0 for r in rep["tpr"])


def test_report_serialises():
    rep = tradeoff_report([VAT_MSC, HUMAN], HUMAN,
                          [("VaT_AGMM32", TradeoffPoint("ce", 114.4, 91.8), VAT_MSC)])
    again = json.loads(json.dumps(rep))
    assert set(again) == {"schema_version", "baseline", "tpr", "tcr", "boundary"}
    assert set(again["tpr"][0]) == {"label", "acc", "div", "tpr"}
    assert again["tcr"] == [{"label": "VaT_AGMM32", "tcr": rep["tcr"][0]["tcr"]}]
    csv_lines = boundary_to_csv(rep).splitlines()
    assert csv_lines[0] == "acc,div" and len(csv_lines) == len(rep["boundary"]) + 1


def test_report_error_carries_label():
    bad = ("broken-pair", TradeoffPoint("ce", 100.0, 60.0), TradeoffPoint("rl", 100.0, 50.0))
    with pytest.raises(TradeoffError, match="broken-pair"):
        tradeoff_report([HUMAN], HUMAN, [bad])
    with pytest.raises(TradeoffError):
        tradeoff_report([], HUMAN)
