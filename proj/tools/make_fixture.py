#!/usr/bin/env python3
"""Generate the toy MLP fixture bundle under fixtures/toy_mlp/.

Trains a small dense classifier on Gaussian class blobs and writes the
weights, biases, and a held-out evaluation set as WQT1 tensor files plus a
manifest.json. The recorded float_top1 is computed exactly the way the C++
runtime will see the data: every tensor is rounded through float32 storage,
then the forward pass runs in float64.
"""

import json
import struct
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "fixtures" / "toy_mlp"

IN_DIM = 32
HIDDEN = (96, 64)
CLASSES = 10
TRAIN_N = 6000
EVAL_N = 1000
SEED = 20240817


def write_wqt(path: Path, arr: np.ndarray) -> None:
    arr32 = np.ascontiguousarray(arr, dtype="<f4")
    with open(path, "wb") as f:
        f.write(b"WQT1")
        f.write(struct.pack("<BBB", 1, 0, arr32.ndim))  # version, dtype=f32, ndim
        for d in arr32.shape:
            f.write(struct.pack("<Q", d))
        f.write(arr32.tobytes())


def make_blobs(rng: np.random.Generator, n: int):
    means = rng.normal(0.0, 1.0, size=(CLASSES, IN_DIM))
    means *= 4.2 / np.linalg.norm(means, axis=1, keepdims=True)
    labels = rng.integers(0, CLASSES, size=n)
    x = means[labels] + rng.normal(0.0, 1.0, size=(n, IN_DIM))
    return x, labels


def relu(x):
    return np.maximum(x, 0.0)


def forward(params, x):
    (w1, b1), (w2, b2), (w3, b3) = params
    h1 = relu(x @ w1 + b1)
    h2 = relu(h1 @ w2 + b2)
    logits = h2 @ w3 + b3
    return h1, h2, logits


def train(rng, x, y):
    dims = [IN_DIM, *HIDDEN, CLASSES]
    params = []
    for din, dout in zip(dims, dims[1:]):
        w = rng.normal(0.0, np.sqrt(2.0 / din), size=(din, dout))
        params.append([w, np.zeros(dout)])

    n = len(x)
    onehot = np.eye(CLASSES)[y]
    lr, batch = 0.05, 128
    for epoch in range(40):
        order = rng.permutation(n)
        for s in range(0, n, batch):
            idx = order[s : s + batch]
            xb, tb = x[idx], onehot[idx]
            h1, h2, logits = forward(params, xb)
            z = logits - logits.max(axis=1, keepdims=True)
            p = np.exp(z)
            p /= p.sum(axis=1, keepdims=True)
            g3 = (p - tb) / len(xb)
            gw3 = h2.T @ g3
            gb3 = g3.sum(axis=0)
            g2 = (g3 @ params[2][0].T) * (h2 > 0)
            gw2 = h1.T @ g2
            gb2 = g2.sum(axis=0)
            g1 = (g2 @ params[1][0].T) * (h1 > 0)
            gw1 = xb.T @ g1
            gb1 = g1.sum(axis=0)
            for (w, b), (gw, gb) in zip(params, [(gw1, gb1), (gw2, gb2), (gw3, gb3)]):
                w -= lr * gw
                b -= lr * gb
    return params


def top1(params, x, y):
    _, _, logits = forward(params, x)
    return float((logits.argmax(axis=1) == y).mean())


def main():
    rng = np.random.default_rng(SEED)
    x_all, y_all = make_blobs(rng, TRAIN_N + EVAL_N)
    x_train, y_train = x_all[:TRAIN_N], y_all[:TRAIN_N]
    x_eval, y_eval = x_all[TRAIN_N:], y_all[TRAIN_N:]

    params = train(rng, x_train, y_train)
    print(f"train top1 = {top1(params, x_train, y_train):.4f}")

    OUT.mkdir(parents=True, exist_ok=True)
    names = ["fc1", "fc2", "fc3"]
    acts = ["relu", "relu", "softmax"]
    layers = []
    stored = []
    for name, act, (w, b) in zip(names, acts, params):
        write_wqt(OUT / f"{name}_w.wqt", w)
        write_wqt(OUT / f"{name}_b.wqt", b)
        stored.append(
            (w.astype(np.float32).astype(np.float64), b.astype(np.float32).astype(np.float64))
        )
        layers.append(
            {
                "name": name,
                "activation": act,
                "weights": f"{name}_w.wqt",
                "bias": f"{name}_b.wqt",
            }
        )

    write_wqt(OUT / "inputs.wqt", x_eval)
    write_wqt(OUT / "labels.wqt", y_eval.astype(np.float64))

    x_stored = x_eval.astype(np.float32).astype(np.float64)
    acc = top1(stored, x_stored, y_eval)
    _, _, logits0 = forward(stored, x_stored[:1])
    manifest = {
        "layers": layers,
        "dataset": {"inputs": "inputs.wqt", "labels": "labels.wqt"},
        "float_top1": acc,
        "sample0_argmax": int(logits0.argmax()),
    }
    with open(OUT / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    print(f"eval top1 = {acc:.4f}, sample0 argmax = {manifest['sample0_argmax']}")


if __name__ == "__main__":
    main()
