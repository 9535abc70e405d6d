"""Minimal external backend for the line-delimited JSON protocol.

score:  log(1 + shared tokens between the claim and the allowed token)
rerank: number of claim tokens in each candidate sentence
prove:  EQ when every claim token appears in the evidence, IND otherwise

Run with --fail-after N to answer N requests and then exit, or with
--stall to read requests without answering.
"""
import json
import math
import os
import re
import sys
import time


def tokens(text):
    return set(re.findall(r"\w+", text.lower()))


def handle(req):
    if req.get("version") != 1:
        return {"version": 1, "error": "unsupported version"}
    claim = tokens(req["context_claim"])
    kind = req["kind"]
    if kind == "score":
        return {"version": 1, "logprobs": {t: math.log(1 + len(claim & tokens(t))) for t in req["allowed"]}}
    if kind == "rerank":
        return {"version": 1, "scores": [len(claim & tokens(c["text"])) for c in req["candidates"]]}
    if kind == "prove":
        seen = set()
        for e in req["context_evidence"]:
            seen |= tokens(e["text"])
        op = "EQ" if claim <= seen else "IND"
        span = re.sub(r"[{}\[\]]", " ", req["context_claim"]).strip()
        return {"version": 1, "proof": "{ %s } [ %s ] %s" % (span, span if op == "EQ" else "", op)}
    return {"version": 1, "error": "unknown kind %r" % kind}


def main():
    args = sys.argv[1:]
    budget = int(args[args.index("--fail-after") + 1]) if "--fail-after" in args else None
    for line in sys.stdin:
        if "--stall" in args:
            time.sleep(60)
        if budget is not None:
            if budget == 0:
                sys.exit(3)
            budget -= 1
        try:
            resp = handle(json.loads(line))
        except Exception as e:  # noqa: BLE001
            resp = {"version": 1, "error": str(e)}
        sys.stdout.write(json.dumps(resp) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    try:
        main()
    except BrokenPipeError:
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        sys.exit(0)
