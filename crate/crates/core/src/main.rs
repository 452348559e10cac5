fn main() {
    std::process::exit(hapdecon::cli::cli_main(std::env::args_os()));
}
