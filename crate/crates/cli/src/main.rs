fn main() {
    std::process::exit(modgff_cli::run(std::env::args_os()));
}
