use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").expect("cargo sets manifest dir"));
    let header = crate_dir.join("include").join("broyden_lab.h");
    let bindings = cbindgen::generate(&crate_dir).expect("C header generation failed");
    bindings.write_to_file(&header);
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
