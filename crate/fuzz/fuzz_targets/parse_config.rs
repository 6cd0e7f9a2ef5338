#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Any text must come back as a config or a list of errors, never a panic.
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = qtraj::config::parse_config(text);
    }
});
