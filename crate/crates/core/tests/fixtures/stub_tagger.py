#!/usr/bin/env python3
"""Line-protocol tagger stub: tags a few known words by exact match."""
import json
import re
import sys
import time

KNOWN = {
    "Ada": "PERSON_FIRSTNAME",
    "Lovelace": "PERSON_LASTNAME",
    "Acme": "ORGANIZATION",
    "Babbage": "NONE",
}

mode = sys.argv[1] if len(sys.argv) > 1 else "ok"

for line in sys.stdin:
    request = json.loads(line)
    if mode == "sleep":
        time.sleep(30)
    if mode == "die":
        sys.exit(1)
    if mode == "malformed":
        print("this is not json", flush=True)
        continue
    entities = []
    for m in re.finditer(r"\w+", request["text"]):
        label = KNOWN.get(m.group())
        if label:
            entities.append({"start": m.start(), "end": m.end(), "label": label, "score": 0.99})
    if mode == "reserved":
        entities.append({"start": 0, "end": 1, "label": "PRONOUN", "score": 0.5})
    rid = request["id"] + "-x" if mode == "bad-id" else request["id"]
    print(json.dumps({"id": rid, "entities": entities}), flush=True)
