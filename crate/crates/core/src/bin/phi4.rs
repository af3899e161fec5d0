use std::io::{stderr, stdout};

fn main() {
    let code = phi4_core::experiment::cli_main(std::env::args_os(), &mut stdout().lock(), &mut stderr().lock());
    std::process::exit(code);
}
