# Answers each NDJSON request with a fixed list per mask, reversed for the
# second mask so pairing by rank is visible.
import json
import sys

WORDS = ["secure", "python", "tutorial", "server"]

for line in sys.stdin:
    req = json.loads(line)
    lists = []
    for i, _ in enumerate(req["mask_positions"]):
        words = WORDS if i == 0 else list(reversed(WORDS))
        lists.append(words[: req["top_k"]])
    print(json.dumps({"suggestions": lists}), flush=True)
