"""Line-protocol predictor used by the test suite.

Usage: stub_predictor.py MODE [runner args...]

good      scores are [255 - mean_r, mean_r], i.e. p(OSCC) = mean red / 255
logit     one score per row: 8 * (mean_r / 255 - 0.5)
exit      exits before the handshake
garbage   answers the handshake, then prints a non-JSON line
wrongseq  answers the handshake, then replies with a stale seq
short     answers the handshake, then drops one row
"""

import base64
import json
import sys


def mean_red(raw, n, side):
    stride = side * side * 3
    out = []
    for i in range(n):
        px = raw[i * stride:(i + 1) * stride]
        out.append(sum(px[0::3]) / (side * side))
    return out


def main():
    mode = sys.argv[1] if len(sys.argv) > 1 else "good"
    if mode == "exit":
        return 0
    for line in sys.stdin:
        req = json.loads(line)
        seq = req["seq"]
        n, h, w, _ = req["shape"]
        raw = base64.b64decode(req["data_b64"])
        means = mean_red(raw, n, h) if n else []
        if mode == "logit":
            probs = [[8.0 * (m / 255.0 - 0.5)] for m in means]
        else:
            probs = [[255.0 - m, m] for m in means]
        if n and mode == "garbage":
            print("this is not json", flush=True)
            continue
        if n and mode == "wrongseq":
            seq = seq - 1
        if n and mode == "short":
            probs = probs[:-1]
        print(json.dumps({"seq": seq, "probs": probs}), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
