"""Policy/value networks for the tile-revealing task.

Two performers share one stepping interface: the recurrent meta-learner
(conv encoder into an LSTM) and a feedforward relational baseline that
scores tiles from a pairwise-similarity matrix.  ``step`` returns the
action distribution, the value estimate, the carried hidden state, and
a cache for backpropagation through time; ``policy_value`` is the
cache-free inference form.
"""

from __future__ import annotations

import numpy as np

from ..board import GRID_SIZE, N_TILES
from ..nn.layers import Conv2D, Dense, LSTMCell
from ..nn.losses import softmax
from ..nn.network import layer_from_dict, layer_to_dict
from .encoding import N_PLANES, AgentObservation

LSTM_HIDDEN = 120
CONV_CHANNELS = 16
CONV_KERNEL = 3
ENC_FEATURES = 64
CORELNET_HIDDEN = 128

FORMAT_VERSION = 1


def _check_finite(logits: np.ndarray, value: float, arch: str) -> None:
    if not (np.isfinite(logits).all() and np.isfinite(value)):
        raise FloatingPointError(f"{arch} head produced non-finite activations")


class RnnAgent:
    """Conv + dense encoder feeding an LSTM with policy and value heads.

    The LSTM input is the 64 encoder features concatenated with the
    previous action one-hot and the previous reward scalar.
    """

    arch = "rnn"
    is_recurrent = True

    def __init__(self, seed: int = 0):
        self.init_seed = seed
        rng = np.random.default_rng(seed)
        side = GRID_SIZE - CONV_KERNEL + 1
        conv_flat = CONV_CHANNELS * side * side
        self.conv = Conv2D(N_PLANES, CONV_CHANNELS, CONV_KERNEL, activation="relu", rng=rng)
        self.encoder = Dense(conv_flat, ENC_FEATURES, activation="relu", rng=rng)
        self.lstm = LSTMCell(ENC_FEATURES + N_TILES + 1, LSTM_HIDDEN, rng=rng)
        self.policy_head = Dense(LSTM_HIDDEN, N_TILES, rng=rng)
        self.value_head = Dense(LSTM_HIDDEN, 1, rng=rng)
        self._conv_shape = (CONV_CHANNELS, side, side)

    def layers(self) -> list:
        return [self.conv, self.encoder, self.lstm, self.policy_head, self.value_head]

    def zero_state(self):
        return self.lstm.zero_state()

    def step(self, obs: AgentObservation, hidden):
        feat, conv_cache = self.conv.forward(obs.planes)
        enc_out, enc_cache = self.encoder.forward(feat.reshape(-1))
        x = np.concatenate([enc_out, obs.prev_action, [obs.prev_reward]])
        h, new_hidden, lstm_cache = self.lstm.forward(x, hidden)
        logits, pol_cache = self.policy_head.forward(h)
        value_out, val_cache = self.value_head.forward(h)
        value = float(value_out[0])
        _check_finite(logits, value, self.arch)
        cache = {
            "conv": conv_cache,
            "enc": enc_cache,
            "lstm": lstm_cache,
            "policy": pol_cache,
            "value": val_cache,
            "logits": logits,
        }
        return softmax(logits), value, new_hidden, cache

    def backward_step(self, cache, dlogits, dvalue, dh, dc):
        dh_total = self.policy_head.backward(cache["policy"], dlogits)
        dh_total = dh_total + self.value_head.backward(cache["value"], np.array([dvalue]))
        if dh is not None:
            dh_total = dh_total + dh
        dx, dh_prev, dc_prev = self.lstm.backward(cache["lstm"], dh_total, dc)
        # Only the encoder slice of the LSTM input carries parameters;
        # prev-action and prev-reward inputs are raw observations.
        dflat = self.encoder.backward(cache["enc"], dx[:ENC_FEATURES])
        self.conv.backward(cache["conv"], dflat.reshape(self._conv_shape))
        return dh_prev, dc_prev

    def policy_value(self, obs: AgentObservation, hidden):
        probs, value, new_hidden, _ = self.step(obs, hidden)
        return probs, value, new_hidden

    def parameters(self):
        return [p for layer in self.layers() for p in layer.parameters()]

    def zero_grad(self) -> None:
        for layer in self.layers():
            layer.zero_grad()


class CoRelNetAgent:
    """Feedforward performer scoring boards by pairwise cell similarity.

    Each cell's one-hot state vector is dotted with every other cell's,
    giving a 49x49 binary similarity matrix that two dense layers map to
    the policy and value heads.  It has no recurrence and ignores the
    previous action and reward, so hidden state is passed through as
    None.
    """

    arch = "corelnet"
    is_recurrent = False

    def __init__(self, seed: int = 0):
        self.init_seed = seed
        rng = np.random.default_rng(seed)
        self.dense1 = Dense(N_TILES * N_TILES, CORELNET_HIDDEN, activation="relu", rng=rng)
        self.dense2 = Dense(CORELNET_HIDDEN, CORELNET_HIDDEN, activation="relu", rng=rng)
        self.policy_head = Dense(CORELNET_HIDDEN, N_TILES, rng=rng)
        self.value_head = Dense(CORELNET_HIDDEN, 1, rng=rng)

    def layers(self) -> list:
        return [self.dense1, self.dense2, self.policy_head, self.value_head]

    def zero_state(self):
        return None

    @staticmethod
    def similarity_matrix(obs: AgentObservation) -> np.ndarray:
        cells = obs.planes.reshape(N_PLANES, N_TILES).T
        return cells @ cells.T

    def step(self, obs: AgentObservation, hidden=None):
        sim = self.similarity_matrix(obs)
        h1, cache1 = self.dense1.forward(sim.reshape(-1))
        h2, cache2 = self.dense2.forward(h1)
        logits, pol_cache = self.policy_head.forward(h2)
        value_out, val_cache = self.value_head.forward(h2)
        value = float(value_out[0])
        _check_finite(logits, value, self.arch)
        cache = {
            "dense1": cache1,
            "dense2": cache2,
            "policy": pol_cache,
            "value": val_cache,
            "logits": logits,
        }
        return softmax(logits), value, None, cache

    def backward_step(self, cache, dlogits, dvalue, dh=None, dc=None):
        dh2 = self.policy_head.backward(cache["policy"], dlogits)
        dh2 = dh2 + self.value_head.backward(cache["value"], np.array([dvalue]))
        dh1 = self.dense2.backward(cache["dense2"], dh2)
        self.dense1.backward(cache["dense1"], dh1)
        return None, None

    def policy_value(self, obs: AgentObservation, hidden=None):
        probs, value, new_hidden, _ = self.step(obs, hidden)
        return probs, value, new_hidden

    def parameters(self):
        return [p for layer in self.layers() for p in layer.parameters()]

    def zero_grad(self) -> None:
        for layer in self.layers():
            layer.zero_grad()


ARCHS = {"rnn": RnnAgent, "corelnet": CoRelNetAgent}


def build_agent(arch: str, seed: int = 0):
    try:
        cls = ARCHS[arch]
    except KeyError:
        raise ValueError(f"unknown arch {arch!r}; expected one of {sorted(ARCHS)}") from None
    return cls(seed)


def agent_to_dict(agent) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "arch": agent.arch,
        "init_seed": agent.init_seed,
        "layers": [layer_to_dict(layer) for layer in agent.layers()],
    }


def agent_from_dict(data: dict):
    if data.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported agent format {data.get('format_version')!r}")
    agent = build_agent(data["arch"], seed=data.get("init_seed", 0))
    rebuilt = [layer_from_dict(entry) for entry in data["layers"]]
    expected = [type(layer) for layer in agent.layers()]
    if [type(layer) for layer in rebuilt] != expected:
        raise ValueError("layer structure does not match the declared architecture")
    if agent.arch == "rnn":
        agent.conv, agent.encoder, agent.lstm, agent.policy_head, agent.value_head = rebuilt
    else:
        agent.dense1, agent.dense2, agent.policy_head, agent.value_head = rebuilt
    return agent
