"""Independent numpy model of the digits accuracy sweep at zero variation.

Recomputes, from the bundled weight and dataset files only, the integer
reference accuracy, the calibrated per-layer ADC windows and the accuracy
of the nibble-split, bit-serial, 32-row-group pipeline with uniform ADCs.
The printed numbers are frozen in tests/frozen_values.rs.

    python3 tests/oracles/digits_oracle.py
"""

import pathlib
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import toml as tomllib

import numpy as np

DATA = pathlib.Path(__file__).resolve().parents[2] / "data"
GROUP = 32


def rnd(x):
    """Round half away from zero."""
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def load_csv(name):
    rows = (DATA / name).read_text().strip().splitlines()
    return np.array([[int(v) for v in r.split(",")] for r in rows[1:]], dtype=np.int64)


def load_model():
    spec = tomllib.loads((DATA / "digits_mlp.toml").read_text())
    layers = []
    for l in spec["layer"]:
        layers.append(
            dict(
                w=load_csv(l["weights"]),
                bias=np.array(l["bias"], dtype=np.int64),
                bits=l["input_bits"],
                relu=l["activation"] == "relu",
                scale=l.get("requant_scale"),
                out_bits=l.get("output_bits"),
            )
        )
    return layers


def finish(layer, acc):
    v = acc + layer["bias"]
    if layer["relu"]:
        v = np.maximum(v, 0)
    if layer["scale"] is not None:
        v = np.clip(rnd(v * layer["scale"]), 0, 2 ** layer["out_bits"] - 1).astype(np.int64)
    return v


def nibble_partials(layer, act):
    """Per (sample, input bit, group, column) high/low nibble sums."""
    w = layer["w"]
    hi, lo = w >> 4, w & 15
    n, rows = act.shape
    out_h, out_l = [], []
    for b in range(layer["bits"]):
        xb = (act >> b) & 1
        hs, ls = [], []
        for g0 in range(0, rows, GROUP):
            sl = slice(g0, min(g0 + GROUP, rows))
            hs.append(xb[:, sl] @ hi[sl])
            ls.append(xb[:, sl] @ lo[sl])
        out_h.append(hs)
        out_l.append(ls)
    return np.array(out_h), np.array(out_l)  # [bit, group, sample, col]


def windows(model, x):
    res = []
    act = x
    for layer in model:
        h, l = nibble_partials(layer, act)
        hi = min(max(float(-min(h.min(), 0)), max(h.max(), 0) * 8.0 / 7.0, 1.0), 8.0 * GROUP)
        lo = min(max(float(max(l.max(), 0)), 1.0), 15.0 * GROUP)
        res.append((hi, lo))
        act = finish(layer, act @ layer["w"])
    return res


def quantize(v, bits, fs, signed):
    levels = float(2 ** (bits - 1)) if signed else float(2**bits - 1)
    lo, hi = (-(2 ** (bits - 1)), 2 ** (bits - 1) - 1) if signed else (0, 2**bits - 1)
    code = np.clip(rnd(v * levels / fs), lo, hi)
    return rnd(code * fs / levels).astype(np.int64)


def pipeline_accuracy(model, x, y, bits, wins):
    act = x
    for k, layer in enumerate(model):
        h, l = nibble_partials(layer, act)
        lossless = (8.0 * GROUP) / 2 ** (bits - 1) <= 1 and (15.0 * GROUP) / (2**bits - 1) <= 1
        fh, fl = (8.0 * GROUP, 15.0 * GROUP) if lossless else wins[k]
        qh = quantize(h.astype(float), bits, fh, True)
        ql = quantize(l.astype(float), bits, fl, False)
        per = 16 * qh + ql
        acc = sum((2**b) * per[b].sum(axis=0) for b in range(layer["bits"]))
        act = finish(layer, acc)
    return float(np.mean(np.argmax(act, axis=1) == y))


def main():
    model = load_model()
    train, test = load_csv("digits_train.csv"), load_csv("digits_test.csv")
    xc, xt, yt = train[:, 1:], test[:, 1:], test[:, 0]
    act = xt
    for layer in model:
        act = finish(layer, act @ layer["w"])
    print("reference_correct", int(np.sum(np.argmax(act, axis=1) == yt)), "of", len(yt))
    wins = windows(model, xc)
    print("windows", wins)
    for bits in range(3, 10):
        acc = pipeline_accuracy(model, xt, yt, bits, wins)
        print("bits", bits, "correct", round(acc * len(yt)))


if __name__ == "__main__":
    main()
