fn main() {
    std::process::exit(cm3::cli::cli_dispatch(std::env::args_os()));
}
