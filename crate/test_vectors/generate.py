"""Regenerate the shared fixtures with numpy.

Everything here is written from the file-format and math descriptions,
without calling the Rust code. Run from this directory:

    python3 generate.py
"""

import json
import struct

import numpy as np

GAMMA = 0.5
C4 = 10.0
FLOOR = 1e-9
BANDS = 34
FEATURES = 70


def gain_loss(g, h):
    d = g**GAMMA - h**GAMMA
    return float(np.sum(d**2 + C4 * d**4))


def gain_grad(g, h):
    h = np.maximum(h, FLOOR)
    d = g**GAMMA - h**GAMMA
    return -(2 * d + 4 * C4 * d**3) * GAMMA * h ** (GAMMA - 1)


def strength_loss(r, h):
    d = (1 - r) ** GAMMA - (1 - h) ** GAMMA
    return float(np.sum(d**2))


def strength_grad(r, h):
    u = np.maximum(1 - h, FLOOR)
    d = (1 - r) ** GAMMA - u**GAMMA
    return 2 * d * GAMMA * u ** (GAMMA - 1)


def losses(rng):
    cases = []
    for i in range(24):
        g, gh, r, rh = (rng.uniform(0, 1, BANDS) for _ in range(4))
        if i == 0:
            g[:], gh[:] = 1.0, 1.0
        if i == 1:
            gh[:4] = 0.0
            rh[:4] = 1.0
        if i == 2:
            g[:] = 0.0
            r[:] = 1.0
        cases.append(
            {
                "g": g.tolist(),
                "g_hat": gh.tolist(),
                "r": r.tolist(),
                "r_hat": rh.tolist(),
                "gain_loss": gain_loss(g, gh),
                "strength_loss": strength_loss(r, rh),
                "gain_grad": gain_grad(g, gh).tolist(),
                "strength_grad": strength_grad(r, rh).tolist(),
            }
        )
    return {"gamma": GAMMA, "c4": C4, "cases": cases}


def sigmoid(x):
    return 1 / (1 + np.exp(-x))


ACT = {0: np.tanh, 1: sigmoid, 2: lambda x: np.maximum(x, 0)}


def tiny_layers(rng):
    def q(rows, cols, lim):
        return rng.integers(-lim, lim + 1, size=(rows, cols)).astype(np.int8)

    def b(rows):
        return rng.uniform(-0.2, 0.2, rows).astype(np.float32)

    # kind, activation, kernel_width, weights, bias
    return [
        (1, 0, 3, q(8, 3 * FEATURES, 20), b(8)),
        (0, 2, 0, q(7, 8, 60), b(7)),
        (2, 0, 0, q(18, 7 + 6, 70), b(18)),
        (3, 1, 0, q(BANDS, 6, 127), b(BANDS)),
        (4, 1, 0, q(BANDS, 6, 127), b(BANDS)),
    ]


def write_pnwt(path, layers):
    out = bytearray(b"PNWT")
    out += struct.pack("<IIIIf", 1, FEATURES, len(layers), 3, 800.0)
    for kind, act, kw, w, bias in layers:
        out += struct.pack("<BBIII", kind, act, w.shape[0], w.shape[1], kw)
        out += w.astype(np.int8).tobytes()
        out += bias.astype("<f4").tobytes()
    with open(path, "wb") as f:
        f.write(out)


def run_tiny(layers, frames):
    # float64 reference: W/256 x + b
    state = {}
    outs = []
    for x in frames:
        h = x.astype(np.float64)
        for i, (kind, act, kw, w, bias) in enumerate(layers):
            wf = w.astype(np.float64) / 256.0
            bf = bias.astype(np.float64)
            if kind == 0:
                h = ACT[act](wf @ h + bf)
            elif kind == 1:
                hist = state.setdefault(i, [np.zeros_like(h) for _ in range(kw - 1)])
                stacked = np.concatenate(hist + [h])
                state[i] = hist[1:] + [h]
                h = ACT[act](wf @ stacked + bf)
            elif kind == 2:
                hid = w.shape[0] // 3
                prev = state.setdefault(i, np.zeros(hid))
                wx, wh = wf[:, : len(h)], wf[:, len(h):]
                z = sigmoid(wx[:hid] @ h + wh[:hid] @ prev + bf[:hid])
                r = sigmoid(wx[hid:2 * hid] @ h + wh[hid:2 * hid] @ prev + bf[hid:2 * hid])
                c = ACT[act](wx[2 * hid:] @ h + wh[2 * hid:] @ (r * prev) + bf[2 * hid:])
                h = z * prev + (1 - z) * c
                state[i] = h
            else:
                break
        heads = {k: ACT[a](w.astype(np.float64) / 256.0 @ h + b.astype(np.float64))
                 for k, a, _, w, b in layers if k in (3, 4)}
        outs.append({"gains": heads[3].tolist(), "strengths": heads[4].tolist()})
    return outs


def write_pnft(path, rows):
    out = bytearray(b"PNFT") + struct.pack("<III", 1, FEATURES, 2 * BANDS + 1)
    for row in rows:
        out += np.asarray(row, dtype="<f4").tobytes()
    with open(path, "wb") as f:
        f.write(out)


def main():
    rng = np.random.default_rng(20240)
    with open("losses.json", "w") as f:
        json.dump(losses(rng), f, indent=1)

    layers = tiny_layers(rng)
    write_pnwt("tiny_model.pnwt", layers)
    frames = rng.normal(0, 1, (12, FEATURES)).astype(np.float32)
    frames[:, 68] = rng.uniform(0.12, 1.0, 12).astype(np.float32)
    with open("tiny_model_io.json", "w") as f:
        json.dump(
            {
                "weights": int(sum(w.size for _, _, _, w, _ in layers)),
                "features": frames.astype(np.float64).tolist(),
                "outputs": run_tiny(layers, frames),
            },
            f,
            indent=1,
        )

    rows = rng.uniform(0, 1, (3, FEATURES + 2 * BANDS + 1)).astype(np.float32)
    rows[:, -1] = [0.0, 1.0, 0.0]
    write_pnft("records.pnft", rows)
    with open("records.json", "w") as f:
        json.dump({"rows": rows.astype(np.float64).tolist()}, f, indent=1)


if __name__ == "__main__":
    main()
