import pytest

from sla.corpus import Report
from sla.stage import (
    StageParseError,
    TnmStage,
    compose_tnm,
    extract_stage_tokens,
    parse_tnm,
    stage_report,
)

DIGIT_SUBS = [f"{d}{s}" for d in "0123456789" for s in ("", "a", "b", "c", "d")]
T_SUBS = DIGIT_SUBS + ["X", "is"]
NM_SUBS = DIGIT_SUBS + ["X"]
PREFIXES = [
    "", "p", "y", "yp", "c", "cp", "r", "rp",
    "yc", "ycp", "yr", "yrp", "cr", "crp", "ycr", "ycrp",
]


def enumerate_tokens():
    """A structured walk of the token grammar: every prefix crossed with
    every T substage, every (T, N) pair, every (N, M) pair, and every
    prefix with a full T/N/M token."""
    tokens = []
    tokens += [f"{p}T{t}" for p in PREFIXES for t in T_SUBS]
    tokens += [f"pT{t}N{n}" for t in T_SUBS for n in NM_SUBS]
    tokens += [f"ypT3N{n}M{m}" for n in NM_SUBS for m in NM_SUBS]
    tokens += [f"{p}T2N0M1" for p in PREFIXES]
    return tokens


def test_enumeration_is_large_and_unique():
    tokens = enumerate_tokens()
    assert len(tokens) >= 1000
    assert len(set(tokens)) == len(tokens)


def test_parse_compose_round_trip_over_enumeration():
    for token in enumerate_tokens():
        stage = parse_tnm(token)
        assert compose_tnm(stage) == token
        assert parse_tnm(compose_tnm(stage)) == stage


def test_parse_fields():
    stage = parse_tnm("ypT3aN1bMX")
    assert stage == TnmStage(prefixes=("y", "p"), t="3a", n="1b", m="X")
    assert parse_tnm("Tis") == TnmStage(prefixes=(), t="is")
    assert parse_tnm("rT2M1") == TnmStage(prefixes=("r",), t="2", n=None, m="1")
    assert parse_tnm("yycrpT0").prefixes == ("y", "y", "c", "r", "p")


@pytest.mark.parametrize(
    "bad",
    ["", "T", "pT", "N0", "pN0M0", "Tq", "T5e", "ppT2", "pT2M0N1",
     "pTisNis", "Nis", "pT3 N0", "qT2", "PT2", "pt2", "T2Mis"],
)
def test_parse_rejects_malformed_tokens(bad):
    with pytest.raises(StageParseError):
        parse_tnm(bad)


def test_stage_dataclass_validation():
    with pytest.raises(StageParseError):
        TnmStage()  # needs at least one substage
    with pytest.raises(StageParseError):
        TnmStage(prefixes=("q",), t="2")
    with pytest.raises(StageParseError):
        TnmStage(t="5e")
    with pytest.raises(StageParseError):
        TnmStage(t="2", n="is")  # "is" is valid for T only
    with pytest.raises(StageParseError):
        compose_tnm(TnmStage(n="0"))  # representable but not composable


def test_every_token_extracts_mid_sentence():
    for token in enumerate_tokens():
        text = f"final diagnosis: stage {token} identified in the specimen."
        found = extract_stage_tokens(text)
        assert found == [(token, 23)], token
        assert text[23 : 23 + len(token)] == token


@pytest.mark.parametrize(
    "template",
    ["({token})", "{token}.", "stage:{token};", "see {token},margins clear",
     "{token}\nnext line", "tumor,{token}"],
)
def test_extraction_survives_punctuation_boundaries(template):
    token = "ypT3aN1bM0"
    text = template.format(token=token)
    found = extract_stage_tokens(text)
    assert [t for t, _ in found] == [token]
    _, start = found[0]
    assert text[start : start + len(token)] == token


def test_extraction_is_maximal_and_ordered():
    text = "clinical cT2N0 before surgery, then ypT3N1M0 on resection."
    found = extract_stage_tokens(text)
    assert [t for t, _ in found] == ["cT2N0", "ypT3N1M0"]
    starts = [s for _, s in found]
    assert starts == sorted(starts)


@pytest.mark.parametrize(
    "text",
    ["CAT3 scan", "pT3x lesion", "the PATIENT", "Mx only", "N0 alone",
     "pTisNis", "T2Mis", "vitamin D3", "sample T", "stage pt2n0"],
)
def test_no_false_extractions(text):
    assert extract_stage_tokens(text) == []


def test_stage_report_takes_first_token_or_none():
    report = Report(
        id="r", cancer="colon",
        lines=("gross description.", "staging: pT2aN0M0.", "also ypT3N1."),
    )
    assert stage_report(report) == TnmStage(prefixes=("p",), t="2a", n="0", m="0")
    empty = Report(id="e", cancer="colon", lines=("no staging information here.",))
    assert stage_report(empty) is None
