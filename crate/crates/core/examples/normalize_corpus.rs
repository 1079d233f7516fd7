//! Rewrites wreath recursion files in the canonical corpus layout.
//!
//! `cargo run --example normalize_corpus -- OUT_DIR FILE...`
//! Each file is validated first; a trailing `.raw` is dropped from the name.

use std::path::Path;

use crochet_core::biset::{validate, WreathRecursion};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some((out, files)) = args.split_first() else {
        eprintln!("usage: normalize_corpus OUT_DIR FILE...");
        std::process::exit(1);
    };
    for p in files {
        let r = WreathRecursion::load(Path::new(p)).unwrap_or_else(|e| panic!("{p}: {e}"));
        let d = validate(&r).unwrap_or_else(|e| panic!("{p}: {e}"));
        let name = Path::new(p).file_name().unwrap().to_string_lossy().replace(".raw", "");
        std::fs::write(Path::new(out).join(&name), r.to_json()).unwrap();
        println!("{name}: {:?} f={:?}", r.base.punctures(), d.f);
    }
}
