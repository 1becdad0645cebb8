import random

import pytest

from oracles import levenshtein_reference
from ocrforge.evalcer import cer, levenshtein
from ocrforge.vote import (AlignedColumn, FoldPredictions, align_pair,
                           collect_fold_files, vote, vote_directory)


# -- align_pair -----------------------------------------------------------


def test_align_identity():
    cols = align_pair("abc", "abc")
    assert [c.op for c in cols] == ["match", "match", "match"]
    assert [(c.a, c.b) for c in cols] == [("a", "a"), ("b", "b"), ("c", "c")]


def test_align_forced_deletion():
    cols = align_pair("abc", "ac")
    assert [c.op for c in cols] == ["match", "del", "match"]
    assert cols[1] == AlignedColumn("del", "b", None)


def test_align_forced_insertion():
    cols = align_pair("ac", "abc")
    assert [c.op for c in cols] == ["match", "ins", "match"]
    assert cols[1] == AlignedColumn("ins", None, "b")


def test_align_empty_sides():
    assert [c.op for c in align_pair("", "ab")] == ["ins", "ins"]
    assert [c.op for c in align_pair("ab", "")] == ["del", "del"]
    assert align_pair("", "") == []


def test_align_prefers_matches_over_sub_pairs():
    cols = align_pair("ab", "ba")
    # cost 2 either way; the tie rule must not produce del+ins chains
    assert sum(c.op != "match" for c in cols) == levenshtein("ab", "ba")


def test_align_cost_equals_levenshtein_on_random_pairs():
    rng = random.Random(13)
    alphabet = "abcde"
    for _ in range(50):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 10)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 10)))
        cols = align_pair(a, b)
        cost = sum(c.op != "match" for c in cols)
        assert cost == levenshtein_reference(a, b)
        # the columns replay back into the original strings
        assert "".join(c.a for c in cols if c.a is not None) == a
        assert "".join(c.b for c in cols if c.b is not None) == b


# -- vote ----------------------------------------------------------------------


def test_fold_predictions_validation():
    with pytest.raises(ValueError):
        FoldPredictions("x", [])
    with pytest.raises(ValueError):
        FoldPredictions("x", ["a", "b"], confidences=[0.5])


def test_vote_single_hypothesis_passthrough():
    assert vote(FoldPredictions("x", ["nur eine"])) == "nur eine"


def test_vote_unanimous():
    assert vote(FoldPredictions("x", ["gleich"] * 5)) == "gleich"


def test_vote_simple_majority():
    assert vote(FoldPredictions("x", ["abc", "abc", "abd"])) == "abc"


def test_vote_tie_broken_by_confidence():
    assert vote(FoldPredictions("x", ["abc", "abd"],
                                confidences=[0.4, 0.9])) == "abd"
    assert vote(FoldPredictions("x", ["abc", "abd"],
                                confidences=[0.9, 0.4])) == "abc"


def test_vote_tie_without_confidence_prefers_first_fold():
    assert vote(FoldPredictions("x", ["abc", "abd"])) == "abc"
    assert vote(FoldPredictions("x", ["abd", "abc"])) == "abd"


def test_vote_epsilon_majority_deletes():
    assert vote(FoldPredictions("x", ["abX", "ab", "ab"])) == "ab"


def test_vote_insertion_majority_inserts():
    assert vote(FoldPredictions("x", ["ab", "axb", "axb"])) == "axb"


def test_vote_multi_insertion_slots():
    assert vote(FoldPredictions("x", ["ab", "axyb", "axyb"])) == "axyb"


def test_vote_trailing_insertions():
    assert vote(FoldPredictions("x", ["ab", "ab!", "ab!"])) == "ab!"


def test_vote_strict_majorities_survive_permutation():
    folds = ["abc", "abc", "abc", "abd", "ebc"]
    want = vote(FoldPredictions("x", folds))
    assert want == "abc"
    rng = random.Random(3)
    for _ in range(10):
        shuffled = folds[:]
        rng.shuffle(shuffled)
        assert vote(FoldPredictions("x", shuffled)) == "abc"


def test_vote_is_deterministic():
    folds = ["Halle", "Halle", "Halte", "Halle", "Walle"]
    preds = FoldPredictions("x", folds, confidences=[0.9, 0.8, 0.7, 0.6, 0.5])
    assert vote(preds) == vote(preds)


def corrupt(text, rate, rng, alphabet):
    out = []
    for ch in text:
        if rng.random() < rate:
            action = rng.random()
            if action < 0.8:
                out.append(rng.choice(alphabet))
            elif action < 0.9:
                pass  # deletion
            else:
                out.append(ch)
                out.append(rng.choice(alphabet))
        else:
            out.append(ch)
    return "".join(out)


def test_vote_beats_average_fold_statistically():
    rng = random.Random(99)
    alphabet = "abcdefghijklmnopqrstuvwxyz "
    truths = ["".join(rng.choice(alphabet) for _ in range(rng.randint(20, 28)))
              for _ in range(120)]
    folds = [[corrupt(t, 0.08, rng, alphabet) for _ in range(5)]
             for t in truths]
    voted_pairs = [(t, vote(FoldPredictions(str(i), fs)))
                   for i, (t, fs) in enumerate(zip(truths, folds))]
    voted_cer = cer(voted_pairs).cer
    fold_cers = [cer(list(zip(truths, [fs[j] for fs in folds]))).cer
                 for j in range(5)]
    assert voted_cer <= max(fold_cers)
    assert voted_cer < sum(fold_cers) / len(fold_cers)


# -- directory interface ----------------------------------------------------------


def test_vote_directory(tmp_path):
    src = tmp_path / "folds"
    src.mkdir()
    for i, text in enumerate(["echt", "echt", "acht"]):
        (src / f"l1.fold{i}.pred.txt").write_text(text + "\n",
                                                  encoding="utf-8")
    (src / "l2.folds.json").write_text('["zwei", "zwei", "drei"]',
                                       encoding="utf-8")
    (src / "unrelated.txt").write_text("ignored", encoding="utf-8")

    out = tmp_path / "voted"
    assert vote_directory(src, out) == 2
    assert (out / "l1.pred.txt").read_text(encoding="utf-8") == "echt\n"
    assert (out / "l2.pred.txt").read_text(encoding="utf-8") == "zwei\n"


def test_collect_fold_files_orders_by_index(tmp_path):
    for i in (10, 2, 0):
        (tmp_path / f"a.fold{i}.pred.txt").write_text(f"h{i}\n",
                                                      encoding="utf-8")
    groups = collect_fold_files(tmp_path)
    assert groups == {"a": ["h0", "h2", "h10"]}


def test_collect_fold_files_rejects_bad_json(tmp_path):
    (tmp_path / "x.folds.json").write_text('{"not": "a list"}',
                                           encoding="utf-8")
    with pytest.raises(ValueError):
        collect_fold_files(tmp_path)
