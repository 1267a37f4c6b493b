"""TNM stage token extraction and parsing.

Stage tokens follow the grammar

    [ycr]* p? T<sub> (N<sub>)? (M<sub>)?
    <sub> = [0-9][a-d]? | X | is      ("is" is accepted for T only)

Matching is case-sensitive on the raw report text (normalization would
destroy the capitalization that makes these tokens recognizable).
Extraction finds maximal matches bounded by non-alphanumeric characters,
in document order, e.g. "...margins negative. pT2aN0M0 with..." yields
the token "pT2aN0M0".
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .corpus import Report

_SUB_T = r"(?:[0-9][a-d]?|X|is)"
_SUB_NM = r"(?:[0-9][a-d]?|X)"

TOKEN_RE = re.compile(
    rf"(?<![A-Za-z0-9])"
    rf"(?P<prefixes>[ycr]*p?)"
    rf"T(?P<t>{_SUB_T})"
    rf"(?:N(?P<n>{_SUB_NM}))?"
    rf"(?:M(?P<m>{_SUB_NM}))?"
    rf"(?![A-Za-z0-9])"
)

_SUB_T_FULL = re.compile(rf"{_SUB_T}$")
_SUB_NM_FULL = re.compile(rf"{_SUB_NM}$")
_PREFIX_FULL = re.compile(r"[ycr]*p?$")


class StageParseError(ValueError):
    """Raised when a string is not a well-formed stage token."""


@dataclass(frozen=True)
class TnmStage:
    """Parsed stage token: ordered prefix modifiers and the t/n/m substages
    (None when absent)."""

    prefixes: tuple[str, ...] = ()
    t: str | None = None
    n: str | None = None
    m: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "prefixes", tuple(self.prefixes))
        if self.t is None and self.n is None and self.m is None:
            raise StageParseError("stage must have at least one of t/n/m")
        if not _PREFIX_FULL.match("".join(self.prefixes)):
            raise StageParseError(f"bad prefixes {self.prefixes!r}")
        if self.t is not None and not _SUB_T_FULL.match(self.t):
            raise StageParseError(f"bad t substage {self.t!r}")
        for name, sub in (("n", self.n), ("m", self.m)):
            if sub is not None and not _SUB_NM_FULL.match(sub):
                raise StageParseError(f"bad {name} substage {sub!r}")


def parse_tnm(token: str) -> TnmStage:
    """Parse one whole stage token, e.g. "ypT3N1bMX"."""
    match = TOKEN_RE.fullmatch(token)
    if match is None:
        raise StageParseError(f"not a stage token: {token!r}")
    return TnmStage(
        prefixes=tuple(match.group("prefixes")),
        t=match.group("t"),
        n=match.group("n"),
        m=match.group("m"),
    )


def compose_tnm(stage: TnmStage) -> str:
    """Inverse of parse_tnm for tokens the grammar can express."""
    if stage.t is None:
        raise StageParseError("cannot compose a token without a T substage")
    parts = ["".join(stage.prefixes), "T", stage.t]
    if stage.n is not None:
        parts += ["N", stage.n]
    if stage.m is not None:
        parts += ["M", stage.m]
    return "".join(parts)


def extract_stage_tokens(text: str) -> list[tuple[str, int]]:
    """All maximal stage tokens in the raw text, with character offsets,
    in document order."""
    return [(m.group(0), m.start()) for m in TOKEN_RE.finditer(text)]


def stage_report(report: Report) -> TnmStage | None:
    """Parse the first stage token of a report, or None when it has none."""
    text = "\n".join(report.lines)
    tokens = extract_stage_tokens(text)
    if not tokens:
        return None
    return parse_tnm(tokens[0][0])
