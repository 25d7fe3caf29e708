#!/usr/bin/env python3
"""Serve an ONNX image classifier over the histolime line protocol.

Reads {"seq", "shape": [N, side, side, 3], "data_b64"} requests on stdin and
answers {"seq", "probs": [[...], ...]} on stdout. Pixels are scaled to
[0, 1], then normalized as (x - mean) * scale per channel. The model input
layout (NHWC or NCHW) is taken from the graph's first input.
"""

import argparse
import base64
import json
import sys


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", required=True)
    ap.add_argument("--side", type=int, required=True)
    ap.add_argument("--mean", default="0,0,0")
    ap.add_argument("--scale", default="1,1,1")
    args = ap.parse_args()

    try:
        import numpy as np
        import onnxruntime as ort
    except ImportError as exc:
        print(f"onnx runner unavailable: {exc}", file=sys.stderr)
        return 3

    session = ort.InferenceSession(args.model, providers=["CPUExecutionProvider"])
    inp = session.get_inputs()[0]
    nchw = len(inp.shape) == 4 and inp.shape[1] == 3
    mean = np.array([float(v) for v in args.mean.split(",")], dtype=np.float32)
    scale = np.array([float(v) for v in args.scale.split(",")], dtype=np.float32)

    for line in sys.stdin:
        req = json.loads(line)
        n, h, w, c = req["shape"]
        if n == 0:
            probs = []
        else:
            raw = np.frombuffer(base64.b64decode(req["data_b64"]), dtype=np.uint8)
            x = raw.reshape(n, h, w, c).astype(np.float32) / 255.0
            x = (x - mean) * scale
            if nchw:
                x = x.transpose(0, 3, 1, 2)
            out = session.run(None, {inp.name: np.ascontiguousarray(x)})[0]
            probs = np.asarray(out, dtype=np.float64).reshape(n, -1).tolist()
        sys.stdout.write(json.dumps({"seq": req["seq"], "probs": probs}) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
