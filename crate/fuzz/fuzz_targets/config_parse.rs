#![no_main]
//! Arbitrary bytes into the key = value config parser. Parsing must never
//! panic, and an accepted config must survive an echo and reparse with
//! every field bit-identical.

use libfuzzer_sys::fuzz_target;
use osc_core::domain::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = parse_config(text) else { return };
    // Validation of accepted configs must not panic either.
    let _ = cfg.validate();

    let floats = [
        cfg.quad_rel_tol,
        cfg.stability_ratio,
        cfg.a1_cap,
        cfg.jn_c1,
        cfg.jn_c2,
    ];
    // "-NaN" parses with the sign bit set but echoes as "NaN", so NaN
    // fields cannot round trip bitwise. Parsing them is still covered.
    if floats.iter().any(|v| v.is_nan()) {
        return;
    }
    let echoed = format!(
        "grid_size = {}\nquad_rel_tol = {}\nrefine_levels = {}\nstability_ratio = {}\n\
         a1_cap = {}\njn_c1 = {}\njn_c2 = {}\n",
        cfg.grid_size,
        cfg.quad_rel_tol,
        cfg.refine_levels,
        cfg.stability_ratio,
        cfg.a1_cap,
        cfg.jn_c1,
        cfg.jn_c2,
    );
    let back = parse_config(&echoed).expect("echoed config must parse");
    assert_eq!(cfg, back, "config round trip changed values");
});
