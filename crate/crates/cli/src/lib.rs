//! Library half of `escape-sim`: the scenario-file schema and the result
//! serializers, kept out of `main.rs` so integration tests can parse what
//! the binary emits.

pub mod results;
pub mod scenario_file;
