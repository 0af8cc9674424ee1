"""Offline training recipe for the bundled 8x8-digits MLP.

Trains a 64 -> 32 -> 10 ReLU MLP on 4-bit inputs, post-training quantizes
weights to 8-bit (per-tensor symmetric) and hidden activations to 4-bit
unsigned, and writes the files consumed by the simulator:

    digits_train.csv   calibration split
    digits_test.csv    evaluation split
    digits_l0.csv      layer 0 weights (inputs x outputs)
    digits_l1.csv      layer 1 weights
    digits_mlp.toml    layer stack: weight files, biases, requant scale

Requires scikit-learn and numpy. Re-running reproduces the shipped files.
"""
import os

import numpy as np
from sklearn.datasets import load_digits
from sklearn.model_selection import train_test_split
from sklearn.neural_network import MLPClassifier

OUT = os.path.dirname(os.path.abspath(__file__))


def quantize_pixels(p):
    return np.minimum(15, np.floor(p * 15 / 16 + 0.5)).astype(int)


def write_dataset(path, x, y):
    with open(path, "w") as f:
        f.write(f"{x.shape[0]},{x.shape[1]},4\n")
        for row, label in zip(x, y):
            f.write(",".join([str(label)] + [str(v) for v in row]) + "\n")


def write_matrix(path, w, precision):
    with open(path, "w") as f:
        f.write(f"{w.shape[0]},{w.shape[1]},{precision}\n")
        for row in w:
            f.write(",".join(str(v) for v in row) + "\n")


def main():
    digits = load_digits()
    x = quantize_pixels(digits.data)
    x_tr, x_te, y_tr, y_te = train_test_split(
        x, digits.target, test_size=0.3, random_state=0, stratify=digits.target
    )
    clf = MLPClassifier(
        hidden_layer_sizes=(32,), activation="relu", max_iter=3000, random_state=0, alpha=1e-3
    )
    clf.fit(x_tr / 15.0, y_tr)
    print("float accuracy", clf.score(x_te / 15.0, y_te))

    w0, w1 = clf.coefs_
    b0, b1 = clf.intercepts_
    s0 = np.abs(w0).max() / 127
    w0q = np.clip(np.round(w0 / s0), -128, 127).astype(int)
    b0q = np.round(b0 / (s0 / 15)).astype(int)
    hidden = np.maximum(x_tr @ w0q + b0q, 0) * s0 / 15
    a_max = hidden.max()
    requant = s0 / a_max
    s1 = np.abs(w1).max() / 127
    w1q = np.clip(np.round(w1 / s1), -128, 127).astype(int)
    b1q = np.round(b1 / (s1 * a_max / 15)).astype(int)

    write_dataset(os.path.join(OUT, "digits_train.csv"), x_tr, y_tr)
    write_dataset(os.path.join(OUT, "digits_test.csv"), x_te, y_te)
    write_matrix(os.path.join(OUT, "digits_l0.csv"), w0q, 8)
    write_matrix(os.path.join(OUT, "digits_l1.csv"), w1q, 8)
    with open(os.path.join(OUT, "digits_mlp.toml"), "w") as f:
        f.write("# 64 -> 32 -> 10 MLP, 4-bit activations, 8-bit weights\n\n")
        f.write("[[layer]]\n")
        f.write('weights = "digits_l0.csv"\n')
        f.write("input_bits = 4\n")
        f.write(f"bias = [{', '.join(str(v) for v in b0q)}]\n")
        f.write('activation = "relu"\n')
        f.write(f"requant_scale = {float(requant)!r}\n")
        f.write("output_bits = 4\n\n")
        f.write("[[layer]]\n")
        f.write('weights = "digits_l1.csv"\n')
        f.write("input_bits = 4\n")
        f.write(f"bias = [{', '.join(str(v) for v in b1q)}]\n")
        f.write('activation = "identity"\n')


if __name__ == "__main__":
    main()
