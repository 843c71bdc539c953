"""Smoke test for the compiled `qqse` module.

Build and install it first, e.g. `maturin develop -m crates/py/Cargo.toml`
or `pip install` of the wheel from `maturin build`.
"""

import os
import sys
import tempfile

import qqse


def main() -> int:
    corpus, table = qqse.synthetic_data(queries=60, seed=11)
    train, test = corpus.split(0.8, 1)
    print(f"corpus {len(corpus)} queries, {corpus.label_count()} labels; train {len(train)}, test {len(test)}")

    model, report = qqse.train(train, table, preset="synthetic", hyper={"max_epochs": 3})
    print(f"trained {model.parameter_count} parameters in {report['wall_time_secs']:.1f}s, best epoch {report['best_epoch']}")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.qqse")
        model.save(path)
        loaded = qqse.Model.load(path)
    assert loaded.to_bytes() == model.to_bytes()

    ranker = loaded.ranker(table)
    query = " ".join(test.queries()[0]["tokens"])
    scores = ranker.scores(query)
    ranked = ranker.rank(query)
    assert len(scores) == 16 and sorted(ranked) == list(range(1, 17))
    print(f"query {query!r}: top question CQ{ranked[0]} ({scores[ranked[0] - 1]:.3f})")
    print("served:", ranker.recommend(query))

    row = ranker.evaluate(test)
    for key in ("scorer", "mrr", "map", "p1", "p2", "p3", "n"):
        assert key in row, key
    print("eval:", {k: round(v, 4) if isinstance(v, float) else v for k, v in row.items()})

    assert qqse.reciprocal_rank([2, 1], [1]) == 0.5
    assert qqse.reformulate("java eclipse download", "Mac OS") == "java eclipse download mac os"
    print("ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
