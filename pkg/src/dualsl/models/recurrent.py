"""Encoder-decoder tanh recurrence with hand-written backprop through time.

Encoder::

    h_t = tanh(E[x_t] + h_{t-1} W_e + b_e),    h_0 = 0,    c = h_T

Decoder, fed the previous output token (BOS first), the context ``c`` at
every step, and optionally the input token at the same position::

    s_t = tanh(D[y_{t-1}] + s_{t-1} W_d + c C + b_d [+ A[x_t]]),    s_0 = 0
    P(. | y_<t, x) = softmax(s_t O + o)        over output tokens + EOS

Row index ``V_out`` of ``D`` is BOS, column ``V_out`` of ``O`` is EOS, and
row ``V_in`` of ``A`` pads positions past the end of the input.
"""

from __future__ import annotations

import heapq

import numpy as np

from ..seqcore import Alphabet, Item, log_softmax
from .base import ConditionalModel, ParamVector


class RecurrentTransducerModel(ConditionalModel):
    family = "recurrent"
    emits_eos = True

    def __init__(self, input_alphabet: Alphabet, output_alphabet: Alphabet, hidden: int = 16,
                 aligned: bool = True, params: ParamVector | None = None):
        self.hidden = int(hidden)
        self.aligned = bool(aligned)
        vi, vo, h = input_alphabet.size, output_alphabet.size, self.hidden
        if params is None:
            blocks = [
                ("enc_embed", (vi, h), "weight"),
                ("enc_rec", (h, h), "weight"),
                ("enc_bias", (h,), "bias"),
                ("dec_embed", (vo + 1, h), "weight"),
                ("dec_rec", (h, h), "weight"),
                ("dec_ctx", (h, h), "weight"),
                ("dec_bias", (h,), "bias"),
            ]
            if self.aligned:
                blocks.append(("align_embed", (vi + 1, h), "weight"))
            blocks += [
                ("out_weight", (h, vo + 1), "weight"),
                ("out_bias", (vo + 1,), "bias"),
            ]
            params = ParamVector(blocks)
        super().__init__(input_alphabet, output_alphabet, params)

    @property
    def eos_index(self) -> int:
        return self.output_alphabet.size

    def hyperparams(self):
        return {"hidden": self.hidden, "aligned": self.aligned}

    def max_decode_length(self, x: Item) -> int:
        return 2 * len(x) + 5

    # -- forward pieces -----------------------------------------------------
    def encode(self, x: Item) -> np.ndarray:
        """Encoder states ``h_0 .. h_T`` stacked as rows."""
        p = self.params
        emb, rec, bias = p["enc_embed"], p["enc_rec"], p["enc_bias"]
        hs = np.zeros((len(x) + 1, self.hidden))
        for t, tok in enumerate(x.tokens, 1):
            hs[t] = np.tanh(emb[tok] + hs[t - 1] @ rec + bias)
        return hs

    def _step_const(self, ctx: np.ndarray) -> np.ndarray:
        return ctx @ self.params["dec_ctx"] + self.params["dec_bias"]

    def _aligned_token(self, x: Item, t: int) -> int:
        # t is 1-based decoder position
        return x.tokens[t - 1] if t <= len(x) else self.input_alphabet.size

    def _dec_step(self, x, t, prev_tok, s_prev, const):
        p = self.params
        pre = p["dec_embed"][prev_tok] + s_prev @ p["dec_rec"] + const
        if self.aligned:
            pre = pre + p["align_embed"][self._aligned_token(x, t)]
        s = np.tanh(pre)
        return s, log_softmax(s @ p["out_weight"] + p["out_bias"])

    # -- likelihood ---------------------------------------------------------
    def log_prob_and_grad(self, x, y, need_grad=True):
        self.check(x, y)
        p = self.params
        H = self.hidden
        hs = self.encode(x)
        ctx = hs[-1]
        const = self._step_const(ctx)
        prev = (self.output_alphabet.size,) + y.tokens  # BOS then y_1..y_L
        targets = y.tokens + (self.eos_index,)
        n = len(targets)
        ss = np.zeros((n + 1, H))
        lps = np.zeros((n, self.output_alphabet.size + 1))
        total = 0.0
        for t in range(1, n + 1):
            ss[t], lps[t - 1] = self._dec_step(x, t, prev[t - 1], ss[t - 1], const)
            total += lps[t - 1, targets[t - 1]]
        if not need_grad:
            return float(total), None

        grad = p.zeros_like()
        g = {name: p.view(grad, name) for name in p.layout}
        W_out, W_dec, C, W_enc = p["out_weight"], p["dec_rec"], p["dec_ctx"], p["enc_rec"]
        ds_next = np.zeros(H)
        dctx = np.zeros(H)
        for t in range(n, 0, -1):
            dlogit = -np.exp(lps[t - 1])
            dlogit[targets[t - 1]] += 1.0
            g["out_weight"] += np.outer(ss[t], dlogit)
            g["out_bias"] += dlogit
            ds = dlogit @ W_out.T + ds_next
            da = ds * (1.0 - ss[t] ** 2)
            g["dec_embed"][prev[t - 1]] += da
            g["dec_rec"] += np.outer(ss[t - 1], da)
            g["dec_bias"] += da
            if self.aligned:
                g["align_embed"][self._aligned_token(x, t)] += da
            dctx += da
            ds_next = da @ W_dec.T
        g["dec_ctx"] += np.outer(ctx, dctx)
        dh = dctx @ C.T
        for t in range(len(x), 0, -1):
            da = dh * (1.0 - hs[t] ** 2)
            g["enc_embed"][x.tokens[t - 1]] += da
            g["enc_rec"] += np.outer(hs[t - 1], da)
            g["enc_bias"] += da
            dh = da @ W_enc.T
        return float(total), grad

    def step_log_probs(self, x: Item, prefix: tuple[int, ...]) -> np.ndarray:
        """Next-symbol log-probabilities after ``prefix`` (length ``V_out + 1``)."""
        const = self._step_const(self.encode(x)[-1])
        s = np.zeros(self.hidden)
        prev = (self.output_alphabet.size,) + tuple(prefix)
        for t in range(1, len(prev) + 1):
            s, lp = self._dec_step(x, t, prev[t - 1], s, const)
        return lp

    # -- decoding -----------------------------------------------------------
    def decode(self, x: Item, beam_width: int = 1) -> Item:
        """Beam search on summed log-probabilities; width 1 is greedy.

        EOS is masked at the first step (items are non-empty) and forced once
        ``max_decode_length`` tokens have been emitted. The returned item's
        search score equals ``log_prob(x, item)``.
        """
        if beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        self.check(x)
        const = self._step_const(self.encode(x)[-1])
        eos, bos = self.eos_index, self.output_alphabet.size
        max_len = self.max_decode_length(x)
        # hypothesis: (score, tokens, state)
        alive = [(0.0, (), np.zeros(self.hidden))]
        finished: list[tuple[float, tuple[int, ...]]] = []
        for t in range(1, max_len + 2):
            candidates = []
            for score, toks, s_prev in alive:
                prev_tok = toks[-1] if toks else bos
                s, lp = self._dec_step(x, t, prev_tok, s_prev, const)
                if t > max_len:
                    candidates.append((score + lp[eos], toks, eos, s))
                    continue
                for k in range(eos + 1):
                    if k == eos and t == 1:
                        continue
                    candidates.append((score + lp[k], toks, k, s))
            # highest score first; ties go to the lexicographically smaller sequence
            top = heapq.nsmallest(beam_width, candidates, key=lambda c: (-c[0], c[1] + (c[2],)))
            alive = []
            for score, toks, k, s in top:
                if k == eos:
                    finished.append((score, toks))
                else:
                    alive.append((score, toks + (k,), s))
            if finished:
                best_done = max(f[0] for f in finished)
                if not alive or best_done >= max(a[0] for a in alive):
                    break
            if not alive:
                break
        best = min(finished, key=lambda f: (-f[0], f[1]))
        return Item(best[1], self.output_alphabet)

    def decode_with_score(self, x: Item, beam_width: int = 1) -> tuple[Item, float]:
        out = self.decode(x, beam_width)
        return out, self.log_prob(x, out)
