//! Calls the bindings through an embedded interpreter.

use pyo3::ffi::c_str;
use pyo3::prelude::*;

#[test]
fn module_round_trip() {
    use genskel::genskel as module;
    pyo3::append_to_inittab!(module);
    Python::attach(|py| {
        py.run(
            c_str!(
                r#"
import genskel
law = genskel.OffspringLaw("binary-half")
assert law.gamma == 1.0
t = genskel.Tree.grow(law, seed=4, depth=6)
assert t.height <= 6 and sum(t.generation_sizes()) == len(t)
assert genskel.count_shapes(4) == 15
assert genskel.exact_survival_geometric(3) == "1/4"
assert genskel.lattice_ensemble(1, 1, "1", 2)["partition"] == "11/4"
rec = genskel.run_experiment("gst-check", "replicas = 20")
assert all(c["passed"] for c in rec["checks"])
try:
    genskel.run_experiment("survival", "nope = 1")
    raise AssertionError("expected ValueError")
except ValueError:
    pass
"#
            ),
            None,
            None,
        )
        .unwrap();
    });
}
