"""Greedy and beam-search decoding with length-normalized scoring."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Hypothesis:
    tokens: list
    log_prob: float
    finished: bool = False

    def score(self, alpha):
        n = max(1, len(self.tokens))
        return self.log_prob / (n ** alpha)


def greedy_decode(step_fn, sos_id, eos_id, max_len=64):
    """Argmax continuation until eos or max_len; ties break on lower id."""
    prefix = [sos_id]
    out = []
    for _ in range(max_len):
        logp = step_fn(prefix)
        nxt = int(np.argmax(logp))
        prefix.append(nxt)
        out.append(nxt)
        if nxt == eos_id:
            break
    return out


def beam_decode(step_fn, sos_id, eos_id, beam=12, alpha=1.0, max_len=64):
    """Standard beam search.

    step_fn(prefix) returns per-token log probabilities for the next
    position given a prefix that starts with sos.  Hypotheses carry summed
    log probability; the final ranking divides by length**alpha.  Ties break
    deterministically toward lexicographically smaller token sequences.
    beam=1 reproduces greedy decoding.
    """
    if beam < 1:
        raise ValueError(f"beam must be >= 1, got {beam}")
    live = [Hypothesis(tokens=[], log_prob=0.0)]
    done = []
    for _ in range(max_len):
        candidates = []
        for hyp in live:
            logp = step_fn([sos_id] + hyp.tokens)
            order = np.argsort(-logp, kind="stable")[: beam + 1]
            for tok in order:
                tok = int(tok)
                candidates.append(
                    Hypothesis(tokens=hyp.tokens + [tok], log_prob=hyp.log_prob + float(logp[tok]),
                               finished=tok == eos_id)
                )
        candidates.sort(key=lambda h: (-h.log_prob, h.tokens))
        live = []
        for hyp in candidates:
            if hyp.finished:
                done.append(hyp)
            else:
                live.append(hyp)
            if len(live) >= beam:
                break
        if not live:
            break
    done.extend(live)  # truncated hypotheses still compete
    best = min(done, key=lambda h: (-h.score(alpha), h.tokens))
    return best.tokens
