#![no_main]

use gmidloop::lut::LutGrid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(grid) = LutGrid::deserialize(text) {
        // accepted grids are well-formed: serialization is a fixpoint
        let canon = grid.serialize();
        let again = LutGrid::deserialize(&canon).unwrap();
        assert_eq!(again.serialize(), canon);
    }
});
