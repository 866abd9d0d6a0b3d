"""Losses, Adam/AMSGrad optimization and the training loop."""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .decoder import mfvi
from .evaluator import uas_las
from .scorer import ModelConfig, ModelParams, edge_mask, label_distribution, score_sentence
from .tree import DecodeConfig, decode

LOG_FLOOR = -30.0  # per-term floor keeping losses finite on degenerate posteriors
_P_FLOOR = float(np.exp(LOG_FLOOR))


@dataclass
class TrainConfig:
    variant: str = "local2o"
    lam: float = None  # interpolation; default 0.40 Local / 0.07 Single
    iterations: int = 3  # MFVI iterations T
    learning_rate: float = 0.01
    adam_beta1: float = 0.0
    adam_beta2: float = 0.95
    adam_eps: float = 1e-8
    decay_rate: float = 0.85
    decay_step: int = 500  # iterations without dev improvement
    amsgrad_after: int = 5000
    max_iterations: int = 75000
    batch_tokens: int = 6000
    early_stop: int = 10000
    eval_every: int = 100
    max_train_len: int = 90
    dev_metric: str = "las"  # or "uas"
    scale: float = 1.0  # desk-scale shrink factor for the schedule
    seed: int = 0
    dropout: bool = False
    single_root: bool = True

    def __post_init__(self):
        if self.lam is None:
            self.lam = 0.07 if self.variant.startswith("single") else 0.40
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if self.decay_step < 1:
            raise ValueError("decay_step must be >= 1")
        if self.variant.endswith("1o"):
            self.iterations = 0

    def scaled(self, name):
        return max(1, int(round(getattr(self, name) / self.scale)))


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def _floored_log(p):
    return ad.log(ad.clip_min(p, _P_FLOOR))


def edge_loss_local(q_final, gold_heads):
    """-sum_j log Q_j(gold head of j)."""
    n = len(gold_heads)
    deps = np.arange(1, n + 1)
    picked = ad.take_at(q_final, (np.asarray(gold_heads, dtype=np.intp), deps))
    return ad.mul(ad.sum_all(_floored_log(picked)), -1.0)


def edge_loss_single(q_final, gold_heads):
    """Binary cross-entropy over every candidate edge."""
    n = len(gold_heads)
    mask = edge_mask(n).astype(bool)
    gold = np.zeros_like(mask)
    for j, h in enumerate(gold_heads, start=1):
        gold[int(h), j] = True
    gi, gj = np.nonzero(gold & mask)
    ni, nj = np.nonzero(mask & ~gold)
    pos = ad.take_at(q_final, (gi, gj))
    neg = ad.take_at(q_final, (ni, nj))
    loss_pos = ad.sum_all(_floored_log(pos))
    loss_neg = ad.sum_all(_floored_log(ad.sub(1.0, neg)))
    return ad.mul(ad.add(loss_pos, loss_neg), -1.0)


def label_loss(p_label, gold_heads, gold_labels):
    """Cross-entropy of the gold label on gold-head edges only."""
    n = len(gold_heads)
    deps = np.arange(1, n + 1)
    picked = ad.take_at(
        p_label,
        (
            np.asarray(gold_heads, dtype=np.intp),
            deps,
            np.asarray(gold_labels, dtype=np.intp),
        ),
    )
    return ad.mul(ad.sum_all(_floored_log(picked)), -1.0)


def total_loss(l_edge, l_label, lam):
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    return ad.add(ad.mul(l_label, lam), ad.mul(l_edge, 1.0 - lam))


def sentence_loss(sentence, params, variant, T, lam, tape=None, pv=None, dropout_rng=None):
    """Full differentiable pipeline: encode -> scores -> MFVI -> loss."""
    if tape is None:
        tape = ad.Tape()
    if pv is None:
        pv = params.as_vars()
    scores = score_sentence(sentence, params, tape, pv, dropout_rng)
    post = mfvi(scores, variant, T)
    gold_heads = sentence.gold_heads
    if variant.startswith("local"):
        l_edge = edge_loss_local(post.final, gold_heads)
    else:
        l_edge = edge_loss_single(post.final, gold_heads)
    p_label = label_distribution(scores.s_label)
    gold_labels = [params.labels.index(lbl) for lbl in sentence.gold_labels]
    l_label = label_loss(p_label, gold_heads, gold_labels)
    return total_loss(l_edge, l_label, lam), tape, pv


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


class AdamState:
    def __init__(self, tensors):
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.vmax = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.amsgrad = False
        self.skipped = 0


def adam_step(params, grads, state, config, lr=None):
    """One (AMS)Adam update in place. Returns False (and changes nothing)
    if any gradient is non-finite."""
    for g in grads.values():
        if not np.all(np.isfinite(g)):
            state.skipped += 1
            return False
    if lr is None:
        lr = config.learning_rate
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    state.t += 1
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for name, p in params.tensors.items():
        g = grads.get(name)
        if g is None:
            continue
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if state.amsgrad:
            np.maximum(state.vmax[name], v, out=state.vmax[name])
            vhat = state.vmax[name] / bc2
        else:
            vhat = v / bc2
        p -= lr * (m / bc1) / (np.sqrt(vhat) + eps)
    return True


# ---------------------------------------------------------------------------
# Batching and the loop
# ---------------------------------------------------------------------------


def make_batches(sentences, batch_tokens, rng=None):
    order = np.arange(len(sentences))
    if rng is not None:
        rng.shuffle(order)
    batches = []
    cur, tokens = [], 0
    for idx in order:
        n = len(sentences[idx])
        if cur and tokens + n > batch_tokens:
            batches.append(cur)
            cur, tokens = [], 0
        cur.append(int(idx))
        tokens += n
    if cur:
        batches.append(cur)
    return batches


def batch_gradients(batch_sents, params, config, dropout_rng=None):
    """Mean loss and gradient over a batch; sentences are processed in a
    canonical (corpus-index) order so the reduction is deterministic."""
    grads = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    total = 0.0
    for sent in batch_sents:
        loss, tape, pv = sentence_loss(
            sent, params, config.variant, config.iterations, config.lam,
            dropout_rng=dropout_rng,
        )
        tape.backward(loss)
        total += float(loss.value)
        for name, var in pv.items():
            if var.grad is not None:
                grads[name] += var.grad
    k = max(1, len(batch_sents))
    for g in grads.values():
        g /= k
    return total / k, grads


def evaluate(params, sentences, variant=None, T=None, single_root=True, punct_mode="upos-punct"):
    """Parse sentences with the current params and score against gold."""
    variant = variant or params.config.variant
    cfg = DecodeConfig(single_root=single_root)
    trees = []
    for sent in sentences:
        tape = ad.Tape()
        scores = score_sentence(sent, params, tape)
        post = mfvi(scores, variant, T)
        p_label = label_distribution(scores.s_label)
        trees.append(decode(post, p_label, cfg))
    return uas_las(trees, sentences, punct_mode, label_names=params.labels)


@dataclass
class TrainResult:
    params: ModelParams
    history: list = field(default_factory=list)
    best_dev: float = -1.0
    iterations_run: int = 0


def train(corpus, dev, config, params=None, model_config=None, log=None, target_uas=None):
    """Token-budget batch training with LR decay, AMSGrad switch and
    early stopping, all driven by dev-set improvement."""
    from .conllu import filter_long
    from .scorer import build_vocabs, init_params

    corpus = filter_long(corpus, config.max_train_len)
    if not corpus:
        raise ValueError("empty training corpus")
    if params is None:
        if model_config is None:
            model_config = ModelConfig.for_variant(config.variant)
        model_config.iterations = config.iterations
        w2i, p2i, labels = build_vocabs(corpus)
        params = init_params(model_config, w2i, p2i, labels, seed=config.seed)

    rng = np.random.default_rng(config.seed)
    dropout_rng = np.random.default_rng(config.seed + 1) if config.dropout else None
    state = AdamState(params.tensors)
    lr = config.learning_rate
    max_iters = config.scaled("max_iterations")
    eval_every = config.scaled("eval_every")
    decay_step = config.scaled("decay_step")
    amsgrad_after = config.scaled("amsgrad_after")
    early_stop = config.scaled("early_stop")

    result = TrainResult(params=params.copy())
    best = -1.0
    since_improvement = 0
    since_decay = 0
    iteration = 0
    batches = []
    while iteration < max_iters:
        if not batches:
            batches = make_batches(corpus, config.batch_tokens, rng)
        batch_ids = batches.pop(0)
        batch = [corpus[i] for i in sorted(batch_ids)]
        if not batch:
            if log:
                log("warning: empty batch skipped")
            continue
        iteration += 1
        loss, grads = batch_gradients(batch, params, config, dropout_rng)
        stepped = adam_step(params, grads, state, config, lr=lr)
        entry = {"iteration": iteration, "loss": loss, "lr": lr, "stepped": stepped}

        if iteration % eval_every == 0 or iteration == max_iters:
            uas, las, _ = evaluate(
                params, dev, config.variant, config.iterations, config.single_root
            )
            metric = las if config.dev_metric == "las" else uas
            entry.update({"dev_uas": uas, "dev_las": las})
            if metric > best:
                best = metric
                result.params = params.copy()
                result.best_dev = best
                since_improvement = 0
                since_decay = 0
            else:
                since_improvement += eval_every
                since_decay += eval_every
            if since_decay >= decay_step:
                lr *= config.decay_rate
                since_decay = 0
            if not state.amsgrad and since_improvement >= amsgrad_after:
                state.amsgrad = True
            if log:
                log(
                    f"iter {iteration} loss {loss:.4f} lr {lr:.5f} "
                    f"dev UAS {uas:.2f} LAS {las:.2f}"
                )
            if target_uas is not None and uas >= target_uas:
                result.history.append(entry)
                break
            if since_improvement >= early_stop:
                result.history.append(entry)
                break
        result.history.append(entry)
    result.iterations_run = iteration
    if result.best_dev < 0:  # never evaluated: keep final params
        result.params = params.copy()
    return result


# ---------------------------------------------------------------------------
# Checkpoint and config-file formats
# ---------------------------------------------------------------------------

_MAGIC = b"MFD1"
_VERSION = 1


def save_model(params, path):
    header = {
        "config": asdict(params.config),
        "word2id": params.word2id,
        "pos2id": params.pos2id,
        "labels": params.labels,
        "tensors": [[k, list(v.shape)] for k, v in sorted(params.tensors.items())],
    }
    hbytes = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", _VERSION, len(hbytes)))
        f.write(hbytes)
        for k, _ in header["tensors"]:
            f.write(np.ascontiguousarray(params.tensors[k], dtype="<f8").tobytes())


def load_model(path):
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != _MAGIC:
        raise ValueError("not a model checkpoint (bad magic)")
    version, hlen = struct.unpack_from("<II", data, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off = 12
    header = json.loads(data[off : off + hlen].decode("utf-8"))
    off += hlen
    tensors = {}
    for name, shape in header["tensors"]:
        count = int(np.prod(shape))
        tensors[name] = (
            np.frombuffer(data, dtype="<f8", count=count, offset=off)
            .reshape(shape)
            .astype(np.float64)
        )
        off += count * 8
    cfg = ModelConfig(**header["config"])
    return ModelParams(cfg, header["word2id"], header["pos2id"], header["labels"], tensors)


def parse_config_file(path):
    """Line-based ``key = value`` file; values parsed as int/float/bool
    when possible, else kept as strings."""
    out = {}
    with open(path, encoding="utf-8") as f:
        for raw in f:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {raw.rstrip()}")
            key, value = (part.strip() for part in line.split("=", 1))
            if value.lower() in ("true", "false"):
                out[key] = value.lower() == "true"
                continue
            for cast in (int, float):
                try:
                    out[key] = cast(value)
                    break
                except ValueError:
                    continue
            else:
                out[key] = value
    return out
