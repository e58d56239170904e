fn main() {
    std::process::exit(modality_heads::cli::run(std::env::args_os()));
}
