fn main() {
    std::process::exit(nvm_bench::cli::main_with_args(std::env::args_os()));
}
