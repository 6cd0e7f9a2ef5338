#![no_main]

use libfuzzer_sys::fuzz_target;
use qtraj::config::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = parse_config(text) else { return };
    let canon = cfg.to_toml().expect("accepted config serializes");
    let back = parse_config(&canon).expect("canonical form parses");
    assert_eq!(back, cfg);
    assert_eq!(back.to_toml().unwrap(), canon);
    assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
});
