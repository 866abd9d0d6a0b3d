"""Attachment-score computation with punctuation exclusion."""
from __future__ import annotations

from dataclasses import dataclass

# conventional PTB punctuation tags, matched against gold XPOS
PTB_PUNCT_XPOS = {"``", "''", ":", ",", "."}

PUNCT_MODES = ("upos-punct", "ptb-pos-set", "none")


@dataclass
class EvalCounts:
    scored: int = 0
    correct_heads: int = 0
    correct_labeled: int = 0
    skipped_punct: int = 0


def _is_punct(token, mode):
    if mode == "upos-punct":
        return token.upos == "PUNCT"
    if mode == "ptb-pos-set":
        return token.xpos in PTB_PUNCT_XPOS
    return False


def uas_las(pred, gold, punct_mode="upos-punct", label_names=None):
    """UAS/LAS over aligned predicted trees and gold sentences.

    ``pred`` items are DependencyTree (label ids, resolved through
    ``label_names``) or (heads, labels) pairs with string labels when
    label_names is None.
    """
    if punct_mode not in PUNCT_MODES:
        raise ValueError(f"unknown punct_mode {punct_mode!r}")
    if len(pred) != len(gold):
        raise ValueError("pred/gold length mismatch")
    c = EvalCounts()
    for tree, sent in zip(pred, gold):
        if hasattr(tree, "heads"):
            heads, labels = tree.heads, tree.labels
        else:
            heads, labels = tree
        if len(heads) != len(sent):
            raise ValueError("sentence length mismatch")
        for j, tok in enumerate(sent.tokens):
            if _is_punct(tok, punct_mode):
                c.skipped_punct += 1
                continue
            c.scored += 1
            if int(heads[j]) != tok.gold_head:
                continue
            c.correct_heads += 1
            plabel = labels[j]
            if label_names is not None:
                plabel = label_names[int(plabel)]
            if plabel == tok.gold_label:
                c.correct_labeled += 1
    if c.scored == 0:
        return 0.0, 0.0, c
    return (
        100.0 * c.correct_heads / c.scored,
        100.0 * c.correct_labeled / c.scored,
        c,
    )
