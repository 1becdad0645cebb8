"""Character error rate evaluation: edit distance, harmonization, codecs.

The canonical corpus metric is length-weighted:

    cer = sum(levenshtein(gt_i, pred_i)) / sum(len(gt_i))

i.e. total edits over total reference characters, NOT the mean of per-line
rates. The per-line mean is reported alongside for comparison only.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from ocrforge import kernels


def levenshtein(a: str, b: str) -> int:
    """Minimum edits (insert/delete/substitute, unit costs) from a to b.

    Operates on Unicode scalar values; no normalization is applied here.
    """
    return kernels.levenshtein(kernels.str_to_codes(a), kernels.str_to_codes(b))


# -- harmonization ----------------------------------------------------------

_RULE_KINDS = ("map_char", "map_string", "collapse_whitespace", "strip_ends")


@dataclass(frozen=True)
class Rule:
    """One rewrite step; rules run in list order.

    map_char / map_string replace `src` with `dst`; collapse_whitespace and
    strip_ends ignore both fields.
    """

    kind: str
    src: str = ""
    dst: str = ""

    def __post_init__(self):
        if self.kind not in _RULE_KINDS:
            raise ValueError(f"unknown rule kind {self.kind!r}")
        if self.kind == "map_char" and len(self.src) != 1:
            raise ValueError("map_char needs a single source character")
        if self.kind == "map_string" and not self.src:
            raise ValueError("map_string needs a non-empty source")

    def apply(self, text: str) -> str:
        if self.kind in ("map_char", "map_string"):
            return text.replace(self.src, self.dst)
        if self.kind == "collapse_whitespace":
            return re.sub(r"\s+", " ", text)
        return text.strip()


_DASHES = "‐‑‒–—―−"
_SINGLE_QUOTES = "‘’‚‛′´`"
_DOUBLE_QUOTES = "“”„‟″"


def default_rules() -> tuple[Rule, ...]:
    """Stock transcript harmonization, idempotent by construction.

    Long s becomes short s; dash, single-quote and double-quote variants
    collapse to -, ' and "; whitespace runs become one space; ends are
    stripped. Every replacement target is a fixed point of every rule, so
    applying the set twice changes nothing.
    """
    rules = [Rule("map_char", "ſ", "s")]
    rules += [Rule("map_char", c, "-") for c in _DASHES]
    rules += [Rule("map_char", c, "'") for c in _SINGLE_QUOTES]
    rules += [Rule("map_char", c, '"') for c in _DOUBLE_QUOTES]
    rules.append(Rule("collapse_whitespace"))
    rules.append(Rule("strip_ends"))
    return tuple(rules)


def harmonize(text: str, rules: Sequence[Rule] | None = None) -> str:
    """Apply the rewrite rules in order (default_rules() when None)."""
    if rules is None:
        rules = default_rules()
    for rule in rules:
        text = rule.apply(text)
    return text


def load_rules(path: str | Path) -> tuple[Rule, ...]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return tuple(Rule(kind=e["kind"], src=e.get("src", ""), dst=e.get("dst", ""))
                 for e in doc)


# -- codec ------------------------------------------------------------------

_CODEPOINT_RE = re.compile(r"^U\+([0-9A-Fa-f]{4,6})$")


@dataclass(frozen=True)
class Codec:
    """Ordered recognizer alphabet; every entry is one Unicode scalar."""

    chars: tuple[str, ...]

    def __post_init__(self):
        if not self.chars:
            raise ValueError("codec must not be empty")
        for c in self.chars:
            if len(c) != 1:
                raise ValueError(f"codec entry {c!r} is not a single character")
        if len(set(self.chars)) != len(self.chars):
            raise ValueError("codec entries must be unique")

    @property
    def size(self) -> int:
        return len(self.chars)

    def __contains__(self, char: str) -> bool:
        return char in self._index

    def index(self, char: str) -> int:
        return self._index[char]

    @property
    def _index(self) -> dict[str, int]:
        cached = getattr(self, "_index_cache", None)
        if cached is None:
            cached = {c: i for i, c in enumerate(self.chars)}
            object.__setattr__(self, "_index_cache", cached)
        return cached

    @classmethod
    def from_text(cls, text: str) -> "Codec":
        chars = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            token = line.split()[0]
            m = _CODEPOINT_RE.match(token)
            if not m:
                raise ValueError(f"bad codec line {raw!r}; expected U+XXXX")
            chars.append(chr(int(m.group(1), 16)))
        return cls(tuple(chars))

    @classmethod
    def from_file(cls, path: str | Path) -> "Codec":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def default_codec() -> Codec:
    """The shipped 144-entry codec (data/codec_default.txt)."""
    text = (resources.files("ocrforge") / "data" /
            "codec_default.txt").read_text(encoding="utf-8")
    return Codec.from_text(text)


@dataclass(frozen=True)
class CodecViolation:
    position: int
    char: str


def codec_check(text: str, codec: Codec) -> list[CodecViolation]:
    """Characters of `text` outside the codec, with their positions."""
    return [CodecViolation(i, c) for i, c in enumerate(text) if c not in codec]


# -- corpus evaluation ------------------------------------------------------


@dataclass(frozen=True)
class LineEval:
    line_id: str
    distance: int
    ref_length: int


@dataclass
class EvalReport:
    """Per-line distances plus the two aggregate rates.

    `cer` is the canonical length-weighted rate; `mean_line_cer` is the
    non-canonical mean of per-line rates, kept for comparison with reports
    that use it (None when any reference line is empty).
    """

    lines: list[LineEval]
    cer: float
    mean_line_cer: float | None

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "cer": self.cer,
            "mean_line_cer": self.mean_line_cer,
            "note": ("cer = total edits / total reference chars (canonical); "
                     "mean_line_cer averages per-line rates and is not the "
                     "canonical metric"),
            "lines": [{"line_id": e.line_id, "distance": e.distance,
                       "ref_length": e.ref_length} for e in self.lines],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["line_id", "distance", "ref_length"])
            for e in self.lines:
                w.writerow([e.line_id, e.distance, e.ref_length])
            w.writerow(["TOTAL(cer)", repr(self.cer), ""])


def cer(pairs: Sequence[tuple[str, str]],
        rules: Sequence[Rule] | None = None,
        ids: Sequence[str] | None = None) -> EvalReport:
    """Evaluate (ground_truth, prediction) pairs.

    Both sides are harmonized with `rules` first when rules are given; pass
    rules=None to compare raw. Raises ValueError("empty ground truth") when
    the reference side has no characters at all.
    """
    if ids is None:
        ids = [str(i) for i in range(len(pairs))]
    if len(ids) != len(pairs):
        raise ValueError("ids and pairs must have equal length")
    lines = []
    for line_id, (gt, pred) in zip(ids, pairs):
        if rules is not None:
            gt = harmonize(gt, rules)
            pred = harmonize(pred, rules)
        lines.append(LineEval(line_id, levenshtein(gt, pred), len(gt)))
    total_ref = sum(e.ref_length for e in lines)
    if total_ref == 0:
        raise ValueError("empty ground truth")
    total_dist = sum(e.distance for e in lines)
    if all(e.ref_length > 0 for e in lines):
        mean_line = sum(e.distance / e.ref_length for e in lines) / len(lines)
    else:
        mean_line = None
    return EvalReport(lines, total_dist / total_ref, mean_line)


# -- file interfaces --------------------------------------------------------


def read_pairs_from_dirs(gt_dir: str | Path,
                         pred_dir: str | Path | None = None
                         ) -> tuple[list[str], list[tuple[str, str]]]:
    """Collect `<name>.gt.txt` / `<name>.pred.txt` pairs by shared name.

    Predictions default to living next to the ground truth. Names missing
    either side are skipped.
    """
    gt_dir = Path(gt_dir)
    pred_dir = Path(pred_dir) if pred_dir is not None else gt_dir
    ids = []
    pairs = []
    for gt_path in sorted(gt_dir.glob("*.gt.txt")):
        name = gt_path.name[:-len(".gt.txt")]
        pred_path = pred_dir / f"{name}.pred.txt"
        if not pred_path.exists():
            continue
        ids.append(name)
        pairs.append((read_transcript(gt_path), read_transcript(pred_path)))
    return ids, pairs


def read_pairs_from_tsv(path: str | Path) -> list[tuple[str, str]]:
    """Read tab-separated `ground_truth<TAB>prediction` rows."""
    pairs = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh, delimiter="\t"):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"expected 2 columns, got {len(row)}: {row!r}")
            pairs.append((row[0], row[1]))
    return pairs


def read_transcript(path: str | Path) -> str:
    """Read a one-line transcript file, dropping the trailing newline."""
    text = Path(path).read_text(encoding="utf-8")
    return text[:-1] if text.endswith("\n") else text


def write_transcript(text: str, path: str | Path) -> None:
    Path(path).write_text(text + "\n", encoding="utf-8")
