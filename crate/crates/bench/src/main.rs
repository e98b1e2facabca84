fn main() {
    std::process::exit(rankadapt_bench::cli::main_with_args(std::env::args_os()));
}
