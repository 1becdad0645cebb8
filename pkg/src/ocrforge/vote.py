"""Combine per-fold OCR hypotheses by character-level plurality voting.

This is a lightweight approximation of full recognizer output voting: the
first hypothesis anchors a progressive alignment, every later hypothesis is
aligned pairwise against that anchor, and each resulting column is decided
by plurality. Absent characters vote as epsilon (deletion), so a majority
of epsilons can delete a character; insertion columns between anchor
positions are slot-aligned. Ties fall back to summed fold confidence when
confidences are given, then to the lowest fold index.
"""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ocrforge import kernels
from ocrforge.evalcer import read_transcript, write_transcript

_EPS = ""

_OP_NAMES = {
    kernels.OP_MATCH: "match",
    kernels.OP_SUB: "sub",
    kernels.OP_DEL: "del",
    kernels.OP_INS: "ins",
}


@dataclass(frozen=True)
class AlignedColumn:
    """One column of a pairwise alignment; None marks a gap."""

    op: str
    a: str | None
    b: str | None


@dataclass
class FoldPredictions:
    """All fold hypotheses for one line, optionally with fold confidences."""

    line_id: str
    hypotheses: list[str]
    confidences: list[float] | None = None

    def __post_init__(self):
        if not self.hypotheses:
            raise ValueError("need at least one hypothesis")
        if (self.confidences is not None
                and len(self.confidences) != len(self.hypotheses)):
            raise ValueError("need one confidence per hypothesis")


def align_pair(a: str, b: str) -> list[AlignedColumn]:
    """Optimal character alignment of two strings.

    The number of sub/del/ins columns equals levenshtein(a, b); ties prefer
    match, then substitution, then deletion, then insertion.
    """
    ops = kernels.align(kernels.str_to_codes(a), kernels.str_to_codes(b))
    cols = []
    i = j = 0
    for op in ops:
        name = _OP_NAMES[int(op)]
        if name in ("match", "sub"):
            cols.append(AlignedColumn(name, a[i], b[j]))
            i += 1
            j += 1
        elif name == "del":
            cols.append(AlignedColumn(name, a[i], None))
            i += 1
        else:
            cols.append(AlignedColumn(name, None, b[j]))
            j += 1
    return cols


def _winner(votes_by_fold: dict[int, str], n_folds: int,
            confidences: Sequence[float] | None) -> str:
    counts: dict[str, int] = defaultdict(int)
    first_fold: dict[str, int] = {}
    conf_sum: dict[str, float] = defaultdict(float)
    for fold in range(n_folds):
        sym = votes_by_fold.get(fold, _EPS)
        counts[sym] += 1
        first_fold.setdefault(sym, fold)
        if confidences is not None:
            conf_sum[sym] += confidences[fold]
    best = max(counts.values())
    tied = [s for s, c in counts.items() if c == best]
    if len(tied) > 1 and confidences is not None:
        top = max(conf_sum[s] for s in tied)
        tied = [s for s in tied if conf_sum[s] == top]
    return min(tied, key=lambda s: first_fold[s])


def vote(preds: FoldPredictions) -> str:
    """Plurality-voted consensus string for one line's fold hypotheses."""
    hyps = preds.hypotheses
    if len(hyps) == 1:
        return hyps[0]
    anchor = hyps[0]
    n = len(anchor)
    n_folds = len(hyps)
    anchor_cols: list[dict[int, str]] = [{0: c} for c in anchor]
    gap_cols: dict[int, list[dict[int, str]]] = defaultdict(list)
    for fold in range(1, n_folds):
        pos = 0
        run = 0
        for col in align_pair(anchor, hyps[fold]):
            if col.op in ("match", "sub"):
                anchor_cols[pos][fold] = col.b
                pos += 1
                run = 0
            elif col.op == "del":
                # anchor char absent in this fold: implicit epsilon vote
                pos += 1
                run = 0
            else:
                slots = gap_cols[pos]
                if run == len(slots):
                    slots.append({})
                slots[run][fold] = col.b
                run += 1
    out = []
    for pos in range(n + 1):
        for slot in gap_cols.get(pos, ()):
            out.append(_winner(slot, n_folds, preds.confidences))
        if pos < n:
            out.append(_winner(anchor_cols[pos], n_folds, preds.confidences))
    return "".join(sym for sym in out if sym != _EPS)


# -- file interface ---------------------------------------------------------

_FOLD_RE = re.compile(r"^(?P<name>.+)\.fold(?P<idx>\d+)\.pred\.txt$")


def collect_fold_files(in_dir: str | Path) -> dict[str, list[str]]:
    """Group `<name>.fold<i>.pred.txt` and `<name>.folds.json` hypotheses.

    Fold files are ordered by their fold index; a JSON file holds a plain
    array of hypothesis strings.
    """
    in_dir = Path(in_dir)
    grouped: dict[str, list[tuple[int, str]]] = defaultdict(list)
    for path in sorted(in_dir.iterdir()):
        m = _FOLD_RE.match(path.name)
        if m:
            grouped[m.group("name")].append(
                (int(m.group("idx")), read_transcript(path)))
    result = {name: [text for _, text in sorted(entries)]
              for name, entries in grouped.items()}
    for path in sorted(in_dir.glob("*.folds.json")):
        name = path.name[:-len(".folds.json")]
        hyps = json.loads(path.read_text(encoding="utf-8"))
        if (not isinstance(hyps, list)
                or not all(isinstance(h, str) for h in hyps)):
            raise ValueError(f"{path} must hold a JSON array of strings")
        result[name] = hyps
    return result


def vote_directory(in_dir: str | Path, out_dir: str | Path) -> int:
    """Vote every fold group in a directory; writes `<name>.pred.txt` files.

    Returns the number of lines voted.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups = collect_fold_files(in_dir)
    for name in sorted(groups):
        voted = vote(FoldPredictions(name, groups[name]))
        write_transcript(voted, out_dir / f"{name}.pred.txt")
    return len(groups)
