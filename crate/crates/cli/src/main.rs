use std::path::PathBuf;

use optical_bpl_cli::{main_with_args, OUT_DIR_ENV};

fn main() {
    let out_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    std::process::exit(main_with_args(std::env::args_os(), out_dir.as_deref()));
}
