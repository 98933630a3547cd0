#![no_main]

use gmidloop::netlist::NetlistDoc;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(doc) = NetlistDoc::parse(text) {
        // parsing preserves bytes (modulo \r\n normalization): render is
        // the identity for \n-only input, and a fixpoint in general
        let rendered = doc.render();
        if !text.contains('\r') {
            assert_eq!(rendered, text);
        }
        let again = NetlistDoc::parse(&rendered).unwrap();
        assert_eq!(again.render(), rendered);
    }
});
