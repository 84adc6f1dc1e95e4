"""Single-layer LSTM tagger maths in numpy: one step, a whole sequence, BPTT.

Gate layout inside ``W`` and ``b`` is input, forget, output, candidate, each a
block of ``hidden_dim`` columns. ``W`` is applied to ``[embedding; h_prev]``.
"""

from dataclasses import dataclass

import numpy as np

PARAMETER_ORDER = ("E", "W", "b", "U", "c_out")
NUM_TAGS = 2
EOS_CLASS = 1


@dataclass
class Parameters:
    E: np.ndarray      # (vocab_size, embed_dim)
    W: np.ndarray      # (embed_dim + hidden_dim, 4 * hidden_dim)
    b: np.ndarray      # (4 * hidden_dim,)
    U: np.ndarray      # (hidden_dim, 2)
    c_out: np.ndarray  # (2,)

    @property
    def vocab_size(self):
        return self.E.shape[0]

    @property
    def embed_dim(self):
        return self.E.shape[1]

    @property
    def hidden_dim(self):
        return self.U.shape[0]

    def arrays(self):
        return [getattr(self, name) for name in PARAMETER_ORDER]

    def copy(self):
        return Parameters(*(array.copy() for array in self.arrays()))

    def astype(self, dtype):
        return Parameters(*(array.astype(dtype) for array in self.arrays()))

    def all_finite(self):
        return all(np.isfinite(array).all() for array in self.arrays())

    @classmethod
    def shapes(cls, vocab_size, embed_dim, hidden_dim):
        return {
            "E": (vocab_size, embed_dim),
            "W": (embed_dim + hidden_dim, 4 * hidden_dim),
            "b": (4 * hidden_dim,),
            "U": (hidden_dim, NUM_TAGS),
            "c_out": (NUM_TAGS,),
        }

    @classmethod
    def uniform(cls, rng, vocab_size, embed_dim, hidden_dim, scale):
        shapes = cls.shapes(vocab_size, embed_dim, hidden_dim)
        return cls(*(rng.uniform(-scale, scale, size=shapes[name]) for name in PARAMETER_ORDER))


@dataclass
class Gradients:
    """Gradients with the embedding part kept sparse (one row per distinct id)."""

    E_ids: np.ndarray
    E_rows: np.ndarray
    W: np.ndarray
    b: np.ndarray
    U: np.ndarray
    c_out: np.ndarray

    def global_norm(self):
        total = sum(float(np.sum(g * g)) for g in (self.E_rows, self.W, self.b, self.U, self.c_out))
        return float(np.sqrt(total))

    def scale(self, factor):
        for name in ("E_rows", "W", "b", "U", "c_out"):
            setattr(self, name, getattr(self, name) * factor)

    def dense_E(self, vocab_size):
        dense = np.zeros((vocab_size, self.E_rows.shape[1]))
        dense[self.E_ids] = self.E_rows
        return dense


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(logits):
    shifted = np.exp(logits - np.max(logits, axis=-1, keepdims=True))
    return shifted / np.sum(shifted, axis=-1, keepdims=True)


def step(params, token_id, h_prev, c_prev):
    """Advance the recurrence by one token.

    Returns ``(h, c, probs)`` where ``probs`` is the distribution over (O, EOS)
    read from the new hidden state. Inputs are never modified.
    """
    H = params.hidden_dim
    D = params.embed_dim
    z = params.E[token_id] @ params.W[:D] + h_prev @ params.W[D:] + params.b
    i = sigmoid(z[:H])
    f = sigmoid(z[H:2 * H])
    o = sigmoid(z[2 * H:3 * H])
    g = np.tanh(z[3 * H:])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    probs = softmax(h @ params.U + params.c_out)
    return h, c, probs


def zero_state(params):
    return np.zeros(params.hidden_dim), np.zeros(params.hidden_dim)


def forward(params, token_ids):
    """Run a whole sequence, keeping what backpropagation needs.

    The input projection is computed for all steps at once; the recurrence
    itself stays sequential.
    """
    H = params.hidden_dim
    D = params.embed_dim
    T = len(token_ids)
    x = params.E[token_ids]
    projected = x @ params.W[:D] + params.b

    hs = np.zeros((T + 1, H))
    cs = np.zeros((T + 1, H))
    gates = np.zeros((T, 4 * H))
    for t in range(T):
        z = projected[t] + hs[t] @ params.W[D:]
        gates[t, :3 * H] = sigmoid(z[:3 * H])
        gates[t, 3 * H:] = np.tanh(z[3 * H:])
        i, f, o, g = np.split(gates[t], 4)
        cs[t + 1] = f * cs[t] + i * g
        hs[t + 1] = o * np.tanh(cs[t + 1])

    probs = softmax(hs[1:] @ params.U + params.c_out)
    return {"x": x, "hs": hs, "cs": cs, "gates": gates, "probs": probs}


def read_offset(lookahead):
    """Steps between consuming token i and reading its tag."""
    return 1 if lookahead else 0


def network_input(token_ids, lookahead, pad_id=0):
    ids = list(token_ids)
    if lookahead:
        ids.append(pad_id)
    return np.asarray(ids, dtype=np.int64)


def sequence_loss(probs, tag_ids, lookahead):
    offset = read_offset(lookahead)
    steps = np.arange(len(tag_ids)) + offset
    picked = probs[steps, tag_ids]
    with np.errstate(divide="ignore"):
        return float(-np.mean(np.log(picked)))


def loss_and_gradients(params, token_ids, tag_ids, lookahead):
    """Mean per-token cross-entropy of one sequence and its exact gradient.

    ``token_ids`` already include the trailing PAD for look-ahead models.
    """
    H = params.hidden_dim
    D = params.embed_dim
    tag_ids = np.asarray(tag_ids, dtype=np.int64)
    n_tags = len(tag_ids)
    offset = read_offset(lookahead)

    cache = forward(params, token_ids)
    probs, hs, cs, gates = cache["probs"], cache["hs"], cache["cs"], cache["gates"]
    loss = sequence_loss(probs, tag_ids, lookahead)

    T = len(token_ids)
    dlogits = np.zeros((T, 2))
    steps = np.arange(n_tags) + offset
    dlogits[steps] = probs[steps]
    dlogits[steps, tag_ids] -= 1.0
    dlogits /= n_tags

    dU = hs[1:].T @ dlogits
    dc_out = dlogits.sum(axis=0)
    dh_out = dlogits @ params.U.T

    dW = np.zeros_like(params.W)
    db = np.zeros_like(params.b)
    dx = np.zeros((T, D))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    W_h = params.W[D:]
    for t in reversed(range(T)):
        i, f, o, g = np.split(gates[t], 4)
        tanh_c = np.tanh(cs[t + 1])
        dh = dh_out[t] + dh_next
        do = dh * tanh_c
        dc = dh * o * (1.0 - tanh_c ** 2) + dc_next
        di = dc * g
        dg = dc * i
        df = dc * cs[t]
        dc_next = dc * f
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            do * o * (1.0 - o),
            dg * (1.0 - g ** 2),
        ])
        dW[:D] += np.outer(cache["x"][t], dz)
        dW[D:] += np.outer(hs[t], dz)
        db += dz
        dx[t] = params.W[:D] @ dz
        dh_next = W_h @ dz

    E_ids, inverse = np.unique(token_ids, return_inverse=True)
    E_rows = np.zeros((len(E_ids), D))
    np.add.at(E_rows, inverse, dx)
    grads = Gradients(E_ids=E_ids, E_rows=E_rows, W=dW, b=db, U=dU, c_out=dc_out)
    return loss, grads


def sgd_update(params, grads, learning_rate, clip_norm=None):
    """In-place SGD step with optional global-norm clipping. Returns the pre-clip norm."""
    norm = grads.global_norm()
    if clip_norm is not None and norm > clip_norm:
        grads.scale(clip_norm / norm)
    params.E[grads.E_ids] -= learning_rate * grads.E_rows
    params.W -= learning_rate * grads.W
    params.b -= learning_rate * grads.b
    params.U -= learning_rate * grads.U
    params.c_out -= learning_rate * grads.c_out
    return norm
