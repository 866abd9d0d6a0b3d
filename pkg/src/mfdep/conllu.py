"""CoNLL-U reading and writing with exact round-trip behaviour.

Multiword-token ranges and empty nodes are retained verbatim (attached
to the following syntactic word position) so that writing a parsed file
back out reproduces the original bytes when no predictions are
substituted.
"""
from __future__ import annotations

from dataclasses import dataclass, field


class ConlluError(ValueError):
    pass


@dataclass
class Token:
    form: str
    lemma: str
    upos: str
    xpos: str
    gold_head: int
    gold_label: str
    feats: str = "_"
    deps: str = "_"
    misc: str = "_"


@dataclass
class Sentence:
    tokens: list  # 1-indexed semantics; tokens[0] is word 1
    sentence_id: str = ""
    comment_lines: list = field(default_factory=list)
    # raw_lines[i] holds verbatim range/empty-node rows appearing just
    # before syntactic word i+1 (key len(tokens) = trailing rows)
    raw_lines: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.tokens)

    @property
    def gold_heads(self):
        return [t.gold_head for t in self.tokens]

    @property
    def gold_labels(self):
        return [t.gold_label for t in self.tokens]


def parse_conllu(text):
    """Parse CoNLL-U text into a list of Sentences."""
    sentences = []
    comments = []
    tokens = []
    raw = {}
    lineno = 0

    def flush():
        nonlocal comments, tokens, raw
        if tokens or comments:
            sid = ""
            for c in comments:
                if c.startswith("# sent_id"):
                    sid = c.split("=", 1)[1].strip() if "=" in c else ""
            sentences.append(Sentence(tokens, sid, comments, raw))
        comments, tokens, raw = [], [], {}

    for line in text.split("\n"):
        lineno += 1
        if line == "":
            flush()
            continue
        if line.startswith("#"):
            comments.append(line)
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(f"line {lineno}: expected 10 columns, got {len(cols)}")
        tok_id = cols[0]
        if "-" in tok_id or "." in tok_id:
            # multiword range or empty node: keep verbatim, skip for parsing
            raw.setdefault(len(tokens), []).append(line)
            continue
        try:
            int(tok_id)
        except ValueError:
            raise ConlluError(f"line {lineno}: bad token id {tok_id!r}") from None
        try:
            head = int(cols[6])
        except ValueError:
            raise ConlluError(f"line {lineno}: non-integer HEAD {cols[6]!r}") from None
        tokens.append(
            Token(
                form=cols[1],
                lemma=cols[2],
                upos=cols[3],
                xpos=cols[4],
                gold_head=head,
                gold_label=cols[7],
                feats=cols[5],
                deps=cols[8],
                misc=cols[9],
            )
        )
    flush()
    return sentences


def write_conllu(sentences, predicted=None):
    """Serialize sentences; optionally substitute predicted (heads, labels).

    ``predicted`` is a list (aligned with sentences) of (heads, labels)
    pairs, each a sequence of length len(sentence); labels may be None to
    keep the gold DEPREL column.
    """
    if predicted is not None and len(predicted) != len(sentences):
        raise ValueError("predicted/sentences length mismatch")
    out = []
    for s_idx, sent in enumerate(sentences):
        heads = labels = None
        if predicted is not None:
            heads, labels = predicted[s_idx]
            if len(heads) != len(sent):
                raise ValueError(f"sentence {s_idx}: predicted head count mismatch")
            if labels is not None and len(labels) != len(sent):
                raise ValueError(f"sentence {s_idx}: predicted label count mismatch")
        out.extend(sent.comment_lines)
        for i, tok in enumerate(sent.tokens):
            for rawline in sent.raw_lines.get(i, ()):
                out.append(rawline)
            head = tok.gold_head if heads is None else int(heads[i])
            label = tok.gold_label if labels is None else labels[i]
            out.append(
                "\t".join(
                    [
                        str(i + 1),
                        tok.form,
                        tok.lemma,
                        tok.upos,
                        tok.xpos,
                        tok.feats,
                        str(head),
                        label,
                        tok.deps,
                        tok.misc,
                    ]
                )
            )
        for rawline in sent.raw_lines.get(len(sent.tokens), ()):
            out.append(rawline)
        out.append("")
    return "\n".join(out) + "\n" if out else ""


def filter_long(sentences, max_len):
    """Drop sentences with more than max_len words, preserving order."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    return [s for s in sentences if len(s) <= max_len]


def read_conllu_file(path):
    with open(path, encoding="utf-8") as f:  # strict codec: encoding errors fatal
        return parse_conllu(f.read())


def write_conllu_file(path, sentences, predicted=None):
    with open(path, "w", encoding="utf-8") as f:
        f.write(write_conllu(sentences, predicted))
