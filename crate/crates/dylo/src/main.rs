fn main() {
    let code = dylo::cli::run(std::env::args().skip(1));
    std::process::exit(code);
}
