import hashlib

import numpy as np
import pytest

from conftest import TOY_TREEBANK, fixture_path
from mfdep.conllu import (
    ConlluError,
    parse_conllu,
    read_conllu_file,
    write_conllu,
    filter_long,
)
from mfdep.tree import is_tree


def test_empty_input():
    assert parse_conllu("") == []


def test_two_token_sentence():
    text = (
        "1\tHe\the\tPRON\tPRP\t_\t2\tnsubj\t_\t_\n"
        "2\truns\trun\tVERB\tVBZ\t_\t0\troot\t_\t_\n\n"
    )
    sents = parse_conllu(text)
    assert len(sents) == 1
    assert sents[0].gold_heads == [2, 0]
    assert sents[0].gold_labels == ["nsubj", "root"]
    assert [t.form for t in sents[0].tokens] == ["He", "runs"]


def test_multiword_range_skipped_but_retained():
    sents = read_conllu_file(fixture_path("sample.conllu"))
    mw = sents[1]
    # the 2-3 range row never becomes a syntactic word
    assert [t.form for t in mw.tokens] == ["We", "going", "to", "run", "."]
    assert mw.gold_heads == [2, 0, 4, 2, 2]


def test_roundtrip_fixture_bytes():
    with open(fixture_path("sample.conllu"), encoding="utf-8") as f:
        original = f.read()
    assert write_conllu(parse_conllu(original)) == original


def test_roundtrip_toy_treebank():
    with open(TOY_TREEBANK, encoding="utf-8") as f:
        original = f.read()
    assert write_conllu(parse_conllu(original)) == original


def test_roundtrip_large_golden_file():
    # replicate the fixture to ~1000 sentences with distinct ids
    with open(fixture_path("sample.conllu"), encoding="utf-8") as f:
        block = f.read()
    parts = []
    for k in range(500):
        parts.append(block.replace("fx-00", f"fx-{k:04d}-"))
    text = "".join(parts)
    sents = parse_conllu(text)
    assert len(sents) == 1000
    out = write_conllu(sents)
    assert hashlib.sha256(out.encode()).digest() == hashlib.sha256(text.encode()).digest()


def test_predicted_substitution_rewrites_head_and_label_only():
    text = (
        "1\tHe\the\tPRON\tPRP\t_\t2\tnsubj\t_\t_\n"
        "2\truns\trun\tVERB\tVBZ\t_\t0\troot\t_\t_\n\n"
    )
    sents = parse_conllu(text)
    out = write_conllu(sents, predicted=[([1, 0], ["det", "root"])])
    lines = out.strip("\n").split("\n")
    assert lines[0].split("\t")[6] == "1"
    assert lines[0].split("\t")[7] == "det"
    assert lines[0].split("\t")[1] == "He"
    assert lines[1].split("\t")[6] == "0"


def test_predicted_length_mismatch_raises():
    sents = parse_conllu("1\ta\ta\tX\tX\t_\t0\troot\t_\t_\n\n")
    with pytest.raises((ValueError, ConlluError)):
        write_conllu(sents, predicted=[([1, 2], ["a", "b"])])


def test_bad_column_count_reports_line_number():
    with pytest.raises(ConlluError) as err:
        parse_conllu("1\tonly\tthree\n\n")
    assert "1" in str(err.value)


def test_non_integer_head_rejected():
    with pytest.raises(ConlluError):
        parse_conllu("1\ta\ta\tX\tX\t_\tzero\troot\t_\t_\n\n")


def _make(n):
    rows = "".join(
        f"{i}\tw{i}\tw{i}\tX\tX\t_\t{i - 1}\tdep\t_\t_\n" for i in range(1, n + 1)
    )
    return parse_conllu(rows + "\n")[0]


def test_filter_long_all_short_unchanged():
    sents = [_make(2), _make(5)]
    assert filter_long(sents, 90) == sents


def test_filter_long_removes_over_limit():
    sents = [_make(90), _make(91)]
    kept = filter_long(sents, 90)
    assert len(kept) == 1 and len(kept[0]) == 90


def test_filter_long_boundary_one():
    sents = [_make(1), _make(2), _make(1)]
    kept = filter_long(sents, 1)
    assert [len(s) for s in kept] == [1, 1]


def test_toy_treebank_gold_heads_are_trees():
    for sent in read_conllu_file(TOY_TREEBANK):
        assert is_tree(np.array(sent.gold_heads))
