fn main() {
    std::process::exit(indii::cli::run(std::env::args_os()));
}
