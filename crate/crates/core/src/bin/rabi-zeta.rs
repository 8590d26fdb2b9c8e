//! `rabi-zeta` command-line tool; see [`rabi_zeta::cli`].

fn main() {
    std::process::exit(rabi_zeta::cli::run(std::env::args_os()));
}
