#!/usr/bin/env python3
"""Line-protocol perplexity stub returning a fixed value."""
import json
import sys

value = float(sys.argv[1]) if len(sys.argv) > 1 else 50.0
for line in sys.stdin:
    request = json.loads(line)
    print(json.dumps({"id": request["id"], "perplexity": value}), flush=True)
