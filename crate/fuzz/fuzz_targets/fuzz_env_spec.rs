#![no_main]
use libfuzzer_sys::fuzz_target;
use splab::env::parse_env_spec;
use splab::mixture::parse_mixture_spec;

// Environment and mixture specs must parse or fail cleanly, and anything
// accepted must reparse from its own canonical spec string.
fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(env) = parse_env_spec(s) {
        let spec = env.spec_string();
        let again = parse_env_spec(&spec).expect("canonical env spec reparses");
        assert_eq!(
            spec,
            again.spec_string(),
            "env spec not canonical for {s:?}"
        );
    }
    if let Ok(mix) = parse_mixture_spec(s) {
        let spec = mix.spec_string();
        let again = parse_mixture_spec(&spec).expect("canonical mixture spec reparses");
        assert_eq!(
            spec,
            again.spec_string(),
            "mixture spec not canonical for {s:?}"
        );
    }
});
