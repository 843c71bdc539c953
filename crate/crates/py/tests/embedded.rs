//! Runs the bindings inside an embedded interpreter, so `cargo test` covers
//! them without building a wheel.

use std::ffi::CString;

use pyo3::prelude::*;

const SCRIPT: &str = r#"
import qqse

assert qqse.tokenize("How to send e-mail in C#?") == ["how", "to", "send", "e-mail", "in", "c#"]
assert len(qqse.Catalog()) == qqse.NUM_QUESTIONS == 16
assert qqse.reciprocal_rank([3, 1, 2], [1]) == 0.5
assert abs(qqse.average_precision([1, 2, 3], [1, 3]) - (1 + 2 / 3) / 2) < 1e-12
assert abs(qqse.precision_at_k([1, 2, 3], [1, 3], 3) - 2 / 3) < 1e-12
try:
    qqse.precision_at_k([1, 2, 3], [1], 0)
    raise AssertionError("K = 0 accepted")
except ValueError:
    pass
assert qqse.reformulate("java eclipse download", "Mac OS") == "java eclipse download mac os"

corpus, table = qqse.synthetic_data(queries=40, seed=3)
assert len(corpus) == 40 and table.dimension == 50
train, test = corpus.split(0.8, 1)
assert (len(train), len(test)) == (32, 8)
model, report = qqse.train(train, table, hyper={"max_epochs": 2, "lstm_hidden": 4, "cnn_filters_per_width": 4, "cnn_fc_out": 8, "head_hidden": 8})
assert len(report["epochs"]) == 2
assert model.hyperparams()["lstm_hidden"] == 4
assert model.fingerprint == table.fingerprint

again = qqse.Model.from_bytes(model.to_bytes())
ranker = again.ranker(table)
scores = ranker.scores("mk1x1 fw2")
assert len(scores) == 16 and all(0 < s < 1 for s in scores)
ranked = ranker.rank("mk1x1 fw2")
assert sorted(ranked) == list(range(1, 17))
assert scores[ranked[0] - 1] == max(scores)
rec = ranker.recommend("mk1x1 fw2", threshold=0.0)
assert rec["cq_id"] == ranked[0] and rec["question"]
assert ranker.recommend("mk1x1 fw2", threshold=1.0) is None
assert ranker.recommend("??") is None
row = ranker.evaluate(test)
assert row["n"] == 8 and 0 <= row["mrr"] <= 1

other = qqse.EmbeddingTable.from_dict({"a": [1.0, 0.0], "b": [0.0, 1.0]})
try:
    model.ranker(other)
    raise AssertionError("foreign embeddings accepted")
except ValueError:
    pass
"#;

#[test]
fn bindings_work_in_an_embedded_interpreter() {
    use qqse::qqse as module;
    pyo3::append_to_inittab!(module);
    Python::initialize();
    Python::attach(|py| {
        let code = CString::new(SCRIPT).unwrap();
        if let Err(e) = py.run(&code, None, None) {
            e.print(py);
            panic!("embedded script failed: {e}");
        }
    });
}
