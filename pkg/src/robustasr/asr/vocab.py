"""Token vocabulary with reserved symbols, plus character error rate."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class TokenVocab:
    """Orderd symbol list behind the reserved ids blank/sos/eos/pad."""

    symbols: str
    blank_id: int = 0
    sos_id: int = 1
    eos_id: int = 2
    pad_id: int = 3

    def __post_init__(self):
        reserved = {self.blank_id, self.sos_id, self.eos_id, self.pad_id}
        if len(reserved) != 4:
            raise ValueError("blank/sos/eos/pad ids must be pairwise distinct")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("vocabulary symbols must be unique")
        self._sym_to_id = {ch: 4 + i for i, ch in enumerate(self.symbols)}
        self._id_to_sym = {i: ch for ch, i in self._sym_to_id.items()}

    @property
    def size(self):
        return 4 + len(self.symbols)

    def encode(self, text):
        try:
            return [self._sym_to_id[ch] for ch in text]
        except KeyError as e:
            raise ValueError(f"symbol {e.args[0]!r} not in vocabulary") from None

    def decode(self, ids):
        return "".join(self._id_to_sym[i] for i in ids if i in self._id_to_sym)


def levenshtein(a, b):
    """Edit distance with unit costs, O(len(a)*len(b))."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb))
        prev = cur
    return prev[-1]


def cer(hyp, ref):
    """levenshtein(hyp, ref) / len(ref); the reference must be non-empty."""
    if not ref:
        raise ValueError("cer needs a non-empty reference")
    return levenshtein(hyp, ref) / len(ref)
