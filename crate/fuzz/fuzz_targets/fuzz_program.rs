#![no_main]
use libfuzzer_sys::fuzz_target;
use splab::machine::{run_program, Program};

// Any accepted program must run inside its budgets: bounded output and a
// step count no greater than the cap.
fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = Program::parse(s) {
        let state = run_program(&p, 512, 64);
        assert!(state.output.len() <= 64, "output exceeded max_output");
        assert!(state.steps <= 512, "machine overran its step budget");
        assert!(state.emitted >= state.output.len() as u64);
    }
});
