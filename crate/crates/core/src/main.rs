fn main() {
    std::process::exit(toa_lift::cli::cli_main(std::env::args_os()));
}
